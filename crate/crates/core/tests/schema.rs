use serde_json::Value;
use ztmesh_core::config::ScenarioConfig;

fn keys_match(config: &Value, schema: &Value, path: &str) {
    let (Value::Object(fields), Some(Value::Object(props))) = (config, schema.get("properties")) else {
        return;
    };
    let mut a: Vec<&String> = fields.keys().collect();
    let mut b: Vec<&String> = props.keys().collect();
    a.sort();
    b.sort();
    assert_eq!(a, b, "keys under `{path}`");
    for (k, v) in fields {
        keys_match(v, &props[k], &format!("{path}.{k}"));
    }
}

#[test]
fn schema_lists_every_config_key() {
    let schema: Value = serde_json::from_str(include_str!("../../../docs/config.schema.json")).unwrap();
    let config: Value = serde_json::from_str(&ScenarioConfig::default().to_json()).unwrap();
    keys_match(&config, &schema, "");
}

#[test]
fn bundled_scenarios_load() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios");
    let mut n = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        ScenarioConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        n += 1;
    }
    assert_eq!(n, 4);
}
