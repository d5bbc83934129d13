use pqsim_cli::config::{parse_config, to_toml, ActionConfig, OutputFormat, RunConfig};

const CONFIGS: &[&str] = &[
    r#"
seed = 11
space = [2, 2]

[state]
kind = "bell"

[action]
type = "device"
target = [0]
repetitions = 5

[action.device]
kind = "EntropyMeter"
alpha = 2.0
precision = 4
"#,
    r#"
space = [2, 3]

[state]
kind = "explicit"
amplitudes = [1, 0, [0, 0.5], 0, 0, 0.5]

[action]
type = "device"
target = [1]

[action.device]
kind = "readout"
basis = "fourier"
dim = 3
"#,
    r#"
space = [2, 2, 2]

[state]
kind = "product"
labels = [0, 1, 1]

[action]
type = "device"
target = [2]

[action.device]
kind = "povm_sampler"
povm = ["proj0", "proj1"]
"#,
    r#"
seed = 3

[action]
type = "experiment"
id = "ensemble-overlap"

[action.params]
epsilons = [0.1, 0.02]
n = 200
source = "zero"

[output]
path = "out.txt"
format = "records"
"#,
    r#"
[action]
type = "check"
check = "product_form"

[action.params]
d = 3
product_only = true
"#,
];

#[test]
fn serialised_configs_parse_back_equal() {
    for text in CONFIGS {
        let cfg: RunConfig = parse_config(text).unwrap();
        let again = parse_config(&to_toml(&cfg).unwrap()).unwrap();
        assert_eq!(cfg, again, "{text}");
    }
}

#[test]
fn parsed_fields_land_where_expected() {
    let cfg = parse_config(CONFIGS[3]).unwrap();
    assert_eq!(cfg.seed, Some(3));
    assert_eq!(cfg.output.format, OutputFormat::Records);
    let ActionConfig::Experiment { id, params } = &cfg.action else {
        panic!("expected an experiment");
    };
    assert_eq!(id, "ensemble-overlap");
    assert_eq!(params.0.len(), 3);
}

#[test]
fn every_sample_config_validates() {
    for text in CONFIGS {
        parse_config(text).unwrap().plan(0).unwrap();
    }
}

#[test]
fn missing_action_is_fatal() {
    let err = parse_config("seed = 1\n").unwrap_err();
    assert!(err.message.contains("action"), "{err}");
}

#[test]
fn misplaced_device_key_is_named() {
    let text = CONFIGS[0].replace("precision = 4", "precision = 4\nthreshold = 0.5");
    let err = pqsim_cli::config::load_plan(&text, 0).unwrap_err();
    assert_eq!(err.key.as_deref(), Some("action.device"));
    assert!(err.message.contains("threshold"), "{err}");
}
