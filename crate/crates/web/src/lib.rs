//! Browser bindings: defect curves, ergodic averages along construction
//! trajectories, and LZ78 compression ratios. Every export returns JSON.

use cutstack::construction::{ConstructionConfig, ConstructionState, SigmaFunction};
use cutstack::deficiency::Lz78Parser;
use cutstack::experiments::criteria::two_column_gadget;
use cutstack::gadget::{power_defect, GadgetTree, DEFAULT_BUDGET};
use cutstack::rational::{rat, to_decimal, to_f64};
use cutstack::symbolic::{trajectory_name, PartitionSpec, SymbolTable};
use serde_json::json;
use wasm_bindgen::prelude::*;

const MAX_STAGE: u32 = 3;
const MAX_STEPS: u32 = 1 << 16;

/// Defect of `Λ^{*(M)}` against the two-column test gadget for `M = 1..=m_max`.
pub fn defect_curve_json(m_max: u32) -> Result<String, String> {
    if m_max == 0 || m_max > 256 {
        return Err("m_max must be in 1..=256".into());
    }
    let t = GadgetTree::leaf(two_column_gadget());
    let mut pts = Vec::new();
    for m in 1..=m_max {
        let d = power_defect(&t, m.into(), DEFAULT_BUDGET).map_err(|e| e.to_string())?;
        pts.push(json!({ "m": m, "lo": to_f64(&d.lo), "hi": to_f64(&d.hi) }));
    }
    Ok(json!(pts).to_string())
}

/// Name and running ones-frequency along a column of `pi_stage`, with
/// `r = 2^{-r_log2}`. `u` in `[0,1)` picks the column by width.
pub fn trajectory_json(r_log2: u32, stage: u32, u: f64, steps: u32) -> Result<String, String> {
    if !(1..=12).contains(&r_log2) || stage > MAX_STAGE || steps == 0 || steps > MAX_STEPS {
        return Err(format!("need r_log2 in 1..=12, stage <= {MAX_STAGE}, steps in 1..={MAX_STEPS}"));
    }
    if !(0.0..1.0).contains(&u) {
        return Err("u must lie in [0, 1)".into());
    }
    let r = rat(1, 1 << r_log2);
    let mut st = ConstructionState::new(ConstructionConfig::new(r.clone(), SigmaFunction::Identity), stage)
        .map_err(|e| e.to_string())?;
    st.run_to(stage).map_err(|e| e.to_string())?;
    let part = PartitionSpec::standard(&r).map_err(|e| e.to_string())?;
    let table = SymbolTable::new(&*st.phi(0).map_err(|e| e.to_string())?, &part).map_err(|e| e.to_string())?;
    let pi = st.pi();
    let (addr, _) = pi.column_at(&rat((u * 1e6) as i64, 1_000_000));
    let len = pi.height(&addr).min(steps.into()) as usize;
    let name = trajectory_name(pi, &table, &addr, 0, len).map_err(|e| e.to_string())?;
    let mut ones = 0u32;
    let avg: Vec<f64> = name
        .symbols
        .iter()
        .enumerate()
        .map(|(k, &b)| {
            ones += u32::from(b);
            f64::from(ones) / (k + 1) as f64
        })
        .collect();
    Ok(json!({
        "height": pi.height(&addr).to_string(),
        "name": name.as_string(),
        "running_average": avg,
        "start": to_decimal(&name.point, 12),
    })
    .to_string())
}

/// LZ78 codelength per symbol of a 0/1 string, sampled every `every` symbols.
pub fn lz78_json(bits: &str, every: u32) -> Result<String, String> {
    if every == 0 {
        return Err("every must be positive".into());
    }
    let mut p = Lz78Parser::new();
    let mut pts = Vec::new();
    let mut n = 0u64;
    for ch in bits.chars().filter(|c| !c.is_whitespace()) {
        match ch {
            '0' => p.push(0),
            '1' => p.push(1),
            c => return Err(format!("symbol {} is {c:?}, expected 0 or 1", n + 1)),
        }
        n += 1;
        if n.is_multiple_of(u64::from(every)) {
            pts.push(json!({ "n": n, "ratio": p.codelength() as f64 / n as f64 }));
        }
    }
    if !n.is_multiple_of(u64::from(every)) {
        pts.push(json!({ "n": n, "ratio": p.codelength() as f64 / n as f64 }));
    }
    Ok(json!(pts).to_string())
}

#[wasm_bindgen]
pub fn defect_curve(m_max: u32) -> Result<String, JsError> {
    defect_curve_json(m_max).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn trajectory(r_log2: u32, stage: u32, u: f64, steps: u32) -> Result<String, JsError> {
    trajectory_json(r_log2, stage, u, steps).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn lz78_ratios(bits: &str, every: u32) -> Result<String, JsError> {
    lz78_json(bits, every).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defect_curve_decreases() {
        let v: serde_json::Value = serde_json::from_str(&defect_curve_json(64).unwrap()).unwrap();
        let a = v.as_array().unwrap();
        assert_eq!(a.len(), 64);
        assert_eq!(a[0]["hi"], 0.75);
        assert!(a[63]["hi"].as_f64().unwrap() < 0.1);
        assert!(defect_curve_json(0).is_err());
    }

    #[test]
    fn trajectories_stay_in_range() {
        let v: serde_json::Value = serde_json::from_str(&trajectory_json(6, 2, 0.3, 200).unwrap()).unwrap();
        let avg = v["running_average"].as_array().unwrap();
        assert_eq!(avg.len(), 200);
        assert!(avg.iter().all(|x| (0.0..=1.0).contains(&x.as_f64().unwrap())));
        assert_eq!(v["name"].as_str().unwrap().len(), 200);
        assert!(trajectory_json(6, 9, 0.3, 10).is_err());
    }

    #[test]
    fn lz78_points() {
        let v: serde_json::Value = serde_json::from_str(&lz78_json(&"0".repeat(2500), 1000).unwrap()).unwrap();
        let ns: Vec<u64> = v.as_array().unwrap().iter().map(|p| p["n"].as_u64().unwrap()).collect();
        assert_eq!(ns, [1000, 2000, 2500]);
        assert!(lz78_json("01x", 1).unwrap_err().contains("symbol 3"));
    }
}
