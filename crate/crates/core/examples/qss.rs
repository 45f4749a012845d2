//! A quasi-steady-state run: load ramps and a tap change, with the reuse
//! each step got from the one before.

use gridstate::io::load_network;
use gridstate::qss::{run_script, ChangeScript, QssOptions};
use std::path::PathBuf;

const SCRIPT: &str = r#"{"steps": [
  {"label": "base", "analyses": [{"type": "ac_pf"}, {"type": "dc_pf"}]},
  {"label": "load +5%", "changes": [{"type": "scale_loads", "factor": 1.05}], "analyses": [{"type": "ac_pf"}, {"type": "dc_pf"}]},
  {"label": "taps +1%", "changes": [{"type": "scale_turns_ratios", "factor": 1.01}], "analyses": [{"type": "ac_pf"}, {"type": "dc_pf"}]},
  {"label": "line 7 out", "changes": [{"type": "branch_status", "branch": 7, "in_service": false}], "analyses": [{"type": "ac_pf"}, {"type": "dc_pf"}]}
]}"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sys = load_network(&PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("cases/case14.m"))?;
    let script = ChangeScript::from_json(SCRIPT)?;
    for step in run_script(sys, None, &script, &QssOptions::default())? {
        println!("{}", step.label.as_deref().unwrap_or("-"));
        for a in &step.analyses {
            println!(
                "  {:<40} iterations {:>2}  matrix {:<5} pattern {:<5} factor {:<5} warm {}",
                format!("{:?}", a.analysis),
                a.result.iterations(),
                a.reuse.matrix_reused,
                a.reuse.pattern_reused,
                a.reuse.factor_reused,
                a.reuse.warm_start
            );
        }
    }
    Ok(())
}
