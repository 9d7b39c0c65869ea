//! Trace and summary emission.
//!
//! Traces are comma-separated with a fixed header. Every float is written
//! with 17 significant digits (`{:.16e}`), which round-trips `f64` exactly,
//! so repeated runs of the same fixture produce byte-identical files.

use std::io::{self, Write};

use crate::solver::{SolveStatus, Trace};

fn full(value: f64) -> String {
    format!("{value:.16e}")
}

/// Writes the trace table: one row per executed iteration with the scalars
/// followed by the flattened iterate coordinates.
pub fn write_trace<W: Write>(writer: &mut W, trace: &Trace) -> io::Result<()> {
    let (dim_x, dim_v) = trace
        .records
        .first()
        .map(|r| (r.x.dim(), r.v_star.dim()))
        .unwrap_or((0, 0));
    let mut header = String::from(
        "n,tau,theta,q_chi,q_mu,q_nu,q_rho,start_distance,s_norm,t_norm,primal_residual,dual_residual",
    );
    for i in 0..dim_x {
        header.push_str(&format!(",x_{i}"));
    }
    for i in 0..dim_v {
        header.push_str(&format!(",v_{i}"));
    }
    writeln!(writer, "{header}")?;

    for rec in &trace.records {
        let mut row = vec![
            rec.n.to_string(),
            full(rec.selection.tau),
            full(rec.theta),
            full(rec.scalars.q_chi),
            full(rec.scalars.q_mu),
            full(rec.scalars.q_nu),
            full(rec.scalars.q_rho),
            full(rec.start_distance),
            full(rec.s_norm),
            full(rec.t_norm),
            full(rec.primal_residual),
            full(rec.dual_residual),
        ];
        row.extend(rec.x.coords().iter().map(|&c| full(c)));
        row.extend(rec.v_star.coords().iter().map(|&c| full(c)));
        writeln!(writer, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn trace_to_string(trace: &Trace) -> String {
    let mut buf = Vec::new();
    write_trace(&mut buf, trace).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("trace output is ASCII")
}

/// Run summary written next to the trace and echoed on standard output.
#[derive(Debug, Clone)]
pub struct Summary {
    pub status: SolveStatus,
    pub iterations: usize,
    pub s_norm: f64,
    pub t_norm: f64,
    pub distance_moved: f64,
    pub x: Vec<f64>,
    pub v_star: Vec<f64>,
}

impl Summary {
    pub fn render(&self) -> String {
        let join = |coords: &[f64]| {
            coords
                .iter()
                .map(|&c| full(c))
                .collect::<Vec<_>>()
                .join(", ")
        };
        format!(
            "status = \"{}\"\niterations = {}\nfinal_s_norm = {}\nfinal_t_norm = {}\ndistance_moved = {}\nx = [{}]\nv_star = [{}]\n",
            self.status.as_str(),
            self.iterations,
            full(self.s_norm),
            full(self.t_norm),
            full(self.distance_moved),
            join(&self.x),
            join(&self.v_star),
        )
    }
}
