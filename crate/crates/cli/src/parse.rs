//! Text forms for reals and complex parameters.
//!
//! Reals accept plain numbers and multiples of `pi` (`pi/6`, `-3pi/8`,
//! `0.5*pi`). Complex values accept `a`, `a+bi`, `a-bi`, `bi` and the polar
//! form `r@θ`.

use hdim_core::C64;
use std::f64::consts::PI;

pub fn parse_real(s: &str) -> Result<f64, String> {
    let s = s.trim();
    let bad = || format!("cannot parse '{s}' as a real number");
    if let Some(pos) = s.find("pi") {
        let (head, tail) = (&s[..pos], &s[pos + 2..]);
        let head = head.trim_end_matches('*').trim();
        let coef = match head {
            "" | "+" => 1.0,
            "-" => -1.0,
            h => h.parse::<f64>().map_err(|_| bad())?,
        };
        let div = match tail.trim() {
            "" => 1.0,
            t => t
                .strip_prefix('/')
                .ok_or_else(bad)?
                .trim()
                .parse::<f64>()
                .map_err(|_| bad())?,
        };
        let v = coef * PI / div;
        return if v.is_finite() { Ok(v) } else { Err(bad()) };
    }
    let v: f64 = s.parse().map_err(|_| bad())?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad())
    }
}

pub fn parse_complex(s: &str) -> Result<C64, String> {
    let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || format!("cannot parse '{s}' as a complex number");
    if s.is_empty() {
        return Err(bad());
    }
    if let Some((r, a)) = s.split_once('@') {
        let r = parse_real(r).map_err(|_| bad())?;
        let a = parse_real(a).map_err(|_| bad())?;
        if r < 0.0 {
            return Err(bad());
        }
        return Ok(C64::from_polar(r, a));
    }
    let Some(body) = s.strip_suffix('i') else {
        return Ok(C64::new(s.parse::<f64>().map_err(|_| bad()).and_then(finite(bad))?, 0.0));
    };
    // split at the last sign that is not part of an exponent
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&i| (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(i) => (&body[..i], &body[i..]),
        None => ("0", body),
    };
    let im = match im {
        "" | "+" => 1.0,
        "-" => -1.0,
        x => x.parse::<f64>().map_err(|_| bad())?,
    };
    let re = re.parse::<f64>().map_err(|_| bad())?;
    if !(re.is_finite() && im.is_finite()) {
        return Err(bad());
    }
    Ok(C64::new(re, im))
}

fn finite(bad: impl Fn() -> String) -> impl Fn(f64) -> Result<f64, String> {
    move |v| if v.is_finite() { Ok(v) } else { Err(bad()) }
}

/// Comma-separated reals.
pub fn parse_real_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').map(parse_real).collect()
}
