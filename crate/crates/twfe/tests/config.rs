use twfe::config::{AnalysisKind, Format, RunConfig};
use twfe::AppError;
use twfe_core::{Scenario, WeightScheme};

fn parse(text: &str) -> Result<RunConfig, AppError> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| AppError::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

const HEAD: &str = "input = \"p.csv\"\n[schema]\nunit = \"u\"\ntime = \"t\"\n";

#[test]
fn defaults() {
    let cfg = parse(&format!("{HEAD}[[analysis]]\nname = \"g\"\nkind = \"generalized\"\ny = \"y\"\nx = \"x\"\n[[analysis.spec.pre_period]]\nvariable = \"y\"\n")).unwrap();
    assert_eq!(cfg.formats, vec![Format::Csv, Format::Json]);
    assert_eq!(cfg.seed, 0);
    let a = &cfg.analyses[0];
    assert_eq!(a.kind, AnalysisKind::Generalized);
    assert_eq!(a.weights, WeightScheme::Ssr);
    assert_eq!(a.spec.pre_period[0].window_start_offset, -12);
    assert_eq!(a.spec.pre_period[0].window_end_offset, -3);
    assert!(!a.se);
}

#[test]
fn missing_required_fields() {
    for (body, needle) in [
        ("kind = \"fd\"\ny = \"y\"\nx = \"x\"", "`k`"),
        ("kind = \"iv\"\ny = \"y\"\nx = \"x\"", "`z`"),
        ("kind = \"two-period\"\ny = \"y\"\nx = \"x\"\nt = 1", "`s`"),
        ("kind = \"multivariate\"\ny = \"y\"", "`xs`"),
        ("kind = \"twfe\"\ny = \"y\"", "`x`"),
        ("kind = \"iv\"\ny = \"y\"\nx = \"x\"\nz = \"z\"\nse = true", "not available"),
        ("kind = \"twfe\"\ny = \"y\"\nx = \"x\"\nfigure = true", "figure"),
    ] {
        let err = parse(&format!("{HEAD}[[analysis]]\nname = \"a\"\n{body}\n")).unwrap_err().to_string();
        assert!(err.contains(needle) && err.contains("analysis `a`"), "{err}");
    }
}

#[test]
fn unknown_keys_rejected() {
    assert!(parse(&format!("{HEAD}[[analysis]]\nname = \"a\"\nkind = \"twfe\"\ny = \"y\"\nx = \"x\"\nbogus = 1\n"))
        .is_err());
    assert!(parse(&format!("{HEAD}[[analysis]]\nname = \"a\"\nkind = \"nope\"\ny = \"y\"\nx = \"x\"\n")).is_err());
}

#[test]
fn analyses_need_input() {
    let err = parse("[[analysis]]\nname = \"a\"\nkind = \"twfe\"\ny = \"y\"\nx = \"x\"\n").unwrap_err();
    assert!(err.to_string().contains("input"));
}

#[test]
fn simulation_overrides() {
    let cfg = parse("seed = 4\n[[simulation]]\nname = \"s\"\nscenario = \"dynamic-effects\"\nn_units = 10\nn_periods = 4\noverrides = { tau = 0.5, noise_sd = 0.0 }\n").unwrap();
    let dgp = cfg.simulations[0].dgp(cfg.seed).unwrap();
    assert_eq!(dgp.scenario, Scenario::DynamicEffects);
    assert_eq!((dgp.tau, dgp.noise_sd, dgp.lag_effect, dgp.seed), (0.5, 0.0, 1.0, 4));
    assert_eq!(cfg.simulations[0].replications, 200);
    for bad in ["{ seed = 3 }", "{ nonsense = 1 }", "{ tau = \"high\" }"] {
        let text = format!("[[simulation]]\nname = \"s\"\nscenario = \"parallel-trends\"\nn_units = 10\nn_periods = 4\noverrides = {bad}\n");
        assert!(parse(&text).is_err(), "{bad}");
    }
}

#[test]
fn bad_names() {
    assert!(parse(&format!("{HEAD}[[analysis]]\nname = \"a/b\"\nkind = \"twfe\"\ny = \"y\"\nx = \"x\"\n")).is_err());
    let dup = "[[simulation]]\nname = \"s\"\nscenario = \"parallel-trends\"\nn_units = 10\nn_periods = 4\n";
    assert!(parse(&format!("{dup}{dup}")).unwrap_err().to_string().contains("duplicate"));
}
