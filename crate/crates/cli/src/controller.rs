use fundlim::{BuiltinController, LinearFilter, StaticGain, ZeroController};

/// Parse `zero`, `gain:<c>` or `arma:<b0,b1,...;a1,a2,...>`.
///
/// `gain:c` applies `z = -c y`. The ARMA form is
/// `z_k = Σ b_i y_{k-i} - Σ a_j z_{k-j}`, with the `;a...` part optional.
pub fn parse_controller(spec: &str) -> Result<BuiltinController, String> {
    let spec = spec.trim();
    let (kind, rest) = match spec.split_once(':') {
        Some((k, r)) => (k.trim(), Some(r)),
        None => (spec, None),
    };
    match (kind.to_ascii_lowercase().as_str(), rest) {
        ("zero", None) => Ok(BuiltinController::Zero(ZeroController)),
        ("gain", Some(c)) => {
            let c = parse_number(c)?;
            Ok(BuiltinController::Gain(StaticGain(c)))
        }
        ("arma", Some(body)) => {
            let (b, a) = match body.split_once(';') {
                Some((b, a)) => (b, a),
                None => (body, ""),
            };
            let b = parse_list(b)?;
            let a = parse_list(a)?;
            LinearFilter::new(b, a).map(BuiltinController::Arma).map_err(|e| e.to_string())
        }
        _ => Err(format!("unrecognized controller spec {spec:?}; expected zero, gain:<c> or arma:<b0,...;a1,...>")),
    }
}

fn parse_number(s: &str) -> Result<f64, String> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| format!("not a number: {:?}", s.trim()))?;
    if !v.is_finite() {
        return Err(format!("controller coefficient must be finite, got {v}"));
    }
    Ok(v)
}

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(parse_number)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grammar() {
        assert_eq!(
            parse_controller("zero").unwrap(),
            BuiltinController::Zero(ZeroController)
        );
        assert_eq!(
            parse_controller("gain:1.5").unwrap(),
            BuiltinController::Gain(StaticGain(1.5))
        );
        let arma = parse_controller("arma:1,0.5;0.25").unwrap();
        assert_eq!(
            arma,
            BuiltinController::Arma(LinearFilter::new(vec![1.0, 0.5], vec![0.25]).unwrap())
        );
        let fir = parse_controller("arma:-2").unwrap();
        assert_eq!(
            fir,
            BuiltinController::Arma(LinearFilter::new(vec![-2.0], vec![]).unwrap())
        );
    }

    #[test]
    fn rejects_garbage() {
        for bad in [
            "",
            "gain",
            "gain:x",
            "zero:1",
            "arma:",
            "arma:;1",
            "pid:1,2,3",
            "gain:inf",
        ] {
            assert!(parse_controller(bad).is_err(), "{bad}");
        }
    }
}
