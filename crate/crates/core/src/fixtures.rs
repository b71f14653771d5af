//! The `toygrep` package: a three-line library that shells out with an
//! unsanitized argument, and the provenance graph its flow produces.

pub const TOYGREP_SOURCE: &str = "function grep(query) {\n    exec(\"grep \" + query);\n}\n";

pub const TOYGREP_GRAPH: &str = r#"{
  "package": "toygrep",
  "vuln_type": "ACI",
  "label": true,
  "nodes": [
    {"id": 1, "operation": "Untainted", "value": "[String: 'grep ']", "file": "index.js",
     "pos": [2, 9, 2, 16], "tainted": false, "flows_from": [], "sink": null},
    {"id": 2, "operation": "call:grep", "value": "'tainted'", "file": "index.js",
     "pos": [1, 0, 3, 1], "tainted": true, "flows_from": [], "sink": null},
    {"id": 3, "operation": "string.concat", "value": "'grep tainted'", "file": "index.js",
     "pos": [2, 9, 2, 24], "tainted": true, "flows_from": [1, 2], "sink": null},
    {"id": 4, "operation": "call:exec", "value": "'grep tainted'", "file": "index.js",
     "pos": [2, 4, 2, 25], "tainted": true, "flows_from": [3], "sink": "exec"}
  ]
}"#;
