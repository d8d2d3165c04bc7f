//! CSV writers. Floats use `{:?}`, the shortest representation that
//! parses back to the same value.

use std::fmt::Write as _;

use bciphs::simulator::BalanceReport;
use bciphs::structure::{FieldState, ThermoClosure};

pub const REPORT_HEADER: [&str; 11] = [
    "t",
    "H",
    "S",
    "power",
    "sigma_total",
    "entropy_flux",
    "energy_residual",
    "entropy_residual",
    "sigma_min",
    "dH_dt",
    "dS_dt",
];

fn push_row(out: &mut String, vals: impl IntoIterator<Item = f64>) {
    let mut first = true;
    for v in vals {
        if !first {
            out.push(',');
        }
        first = false;
        write!(out, "{v:?}").unwrap();
    }
    out.push('\n');
}

pub fn report_csv(reports: &[BalanceReport]) -> String {
    let mut out = REPORT_HEADER.join(",");
    out.push('\n');
    for r in reports {
        push_row(
            &mut out,
            [
                r.t,
                r.h,
                r.s,
                r.power,
                r.sigma_total,
                r.entropy_flux,
                r.energy_residual,
                r.entropy_residual,
                r.sigma_min,
                r.dh_dt,
                r.ds_dt,
            ],
        );
    }
    out
}

/// Long format: one row per recorded time and node, with columns
/// `t, z, <fields>, s, T`.
pub fn trajectory_csv(
    traj: &[(f64, FieldState)],
    field_names: &[&str],
    tc: &dyn ThermoClosure,
) -> String {
    let mut out = String::from("t,z");
    for f in field_names {
        out.push(',');
        out.push_str(f);
    }
    out.push_str(",s,T\n");
    for (t, st) in traj {
        let z = st.grid().nodes();
        let mut xk = vec![0.0; st.n()];
        for k in 0..st.len() {
            st.x_at(k, &mut xk);
            let temp = tc.temperature(&xk, st.s[k]);
            push_row(
                &mut out,
                [*t, z[k]]
                    .into_iter()
                    .chain(xk.iter().copied())
                    .chain([st.s[k], temp]),
            );
        }
    }
    out
}
