use proptest::prelude::*;
use qlayer::config::{load_config, parse_config};
use qlayer::run::{run_command, Command};
use qlayer::Error;
use std::path::PathBuf;

fn shipped(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

#[test]
fn shipped_configs_validate() {
    let plane = load_config(&shipped("plane.toml")).unwrap();
    assert_eq!(plane.rho_m(), None);
    let bump = load_config(&shipped("bump.toml")).unwrap();
    let rho = bump.rho_m().unwrap();
    assert!(bump.layer.a < rho);
    assert_eq!(bump.layer.r0, 1.5);
}

#[test]
fn missing_file_is_an_io_error() {
    assert!(matches!(load_config(&shipped("absent.toml")), Err(Error::Io(_))));
}

#[test]
fn every_misspelled_section_key_is_rejected() {
    let base = "[surface]\nfamily = \"plane\"\n[layer]\na = 1.0\n";
    for extra in [
        "[certify]\nr_0 = 1.0\n",
        "[certify.quadrature]\nordr = 4\n",
        "[certify.localization]\nplato = 2\n",
        "[solve]\nbracket = [10.0]\n",
        "[solve.eigen]\ncont = 3\n",
        "[geometry.thickness]\nnodes = 3\n",
        "[identities]\nsample = 3\n",
        "[output]\nfmt = \"csv\"\n",
    ] {
        match parse_config(&format!("{base}{extra}")) {
            Err(Error::Parse(msg)) => assert!(msg.contains("unknown field"), "{msg}"),
            other => panic!("{extra}: expected a parse error, got {other:?}"),
        }
    }
}

#[test]
fn validation_names_the_field() {
    let base = "[surface]\nfamily = \"compact-bump\"\nparams = { h = 1.5, s = 1.5 }\n[layer]\na = 0.1\n";
    for (extra, field) in [
        ("[solve.grid]\nnodes = 41\n", "solve.grid.nodes"),
        ("[solve.grid]\nr_max = 1.0\n", "solve.grid.r_max"),
        ("[solve.eigen]\ntol = 0.0\n", "solve.eigen.tol"),
        ("[certify]\nsigma_grid = [0.1, 0.2]\n", "certify.sigma_grid"),
        ("[certify]\ndelta_min = -1.0\n", "certify.delta_min"),
        ("[identities]\nsamples = 0\n", "identities.samples"),
    ] {
        let r = parse_config(&format!("{base}{extra}")).unwrap().validate();
        match r {
            Err(Error::Validation { field: f, .. }) => assert_eq!(f, field, "{extra}"),
            other => panic!("{extra}: expected a validation error on {field}, got {other:?}"),
        }
    }
}

#[test]
fn report_reruns_identically_from_its_config_echo() {
    let v = load_config(&shipped("bump.toml")).unwrap();
    let first = run_command(Command::Certify, &v).unwrap();
    let echo = toml::to_string(&first.config).unwrap();
    let again = parse_config(&echo).unwrap().validate().unwrap();
    let second = run_command(Command::Certify, &again).unwrap();
    assert_eq!(
        serde_json::to_string(&first).unwrap(),
        serde_json::to_string(&second).unwrap()
    );
}

proptest! {
    #[test]
    fn config_round_trips_through_toml(
        a in 0.01f64..0.2,
        h in 0.0f64..1.0,
        s in 1.0f64..3.0,
        nodes in 3usize..200,
        seed in 0u64..(i64::MAX as u64),
    ) {
        let text = format!(
            "[surface]\nfamily = \"compact-bump\"\nparams = {{ h = {h:?}, s = {s:?} }}\n[layer]\na = {a:?}\n\
             [solve.grid]\nnodes = {nodes}\n[solve.eigen]\nseed = {seed}\n"
        );
        let cfg = parse_config(&text).unwrap();
        let back = parse_config(&toml::to_string(&cfg).unwrap()).unwrap();
        prop_assert_eq!(cfg, back);
    }
}
