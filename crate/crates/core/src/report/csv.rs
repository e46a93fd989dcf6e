use crate::matrix::DenseMatrix;
use crate::stats::KdeCurve;
use std::fmt::Write;

// `{}` on f64 prints the shortest text that parses back to the same value.

pub fn curve_csv(c: &KdeCurve) -> String {
    let mut s = String::from("x,density\n");
    for (x, d) in c.grid.iter().zip(&c.density) {
        writeln!(s, "{x},{d}").unwrap();
    }
    s
}

/// Several named curves in long format.
pub fn curves_csv(curves: &[(&str, &KdeCurve)]) -> String {
    let mut s = String::from("series,x,density\n");
    for (name, c) in curves {
        for (x, d) in c.grid.iter().zip(&c.density) {
            writeln!(s, "{name},{x},{d}").unwrap();
        }
    }
    s
}

pub fn projection_csv(ids: &[String], points: &DenseMatrix, poisoned: Option<&[bool]>) -> String {
    let mut s = String::from("id,x,y,poisoned\n");
    for (i, (id, p)) in ids.iter().zip(points.row_iter()).enumerate() {
        let flag = poisoned.map_or("", |f| if f[i] { "true" } else { "false" });
        writeln!(s, "{},{},{},{flag}", quote(id), p[0], p[1]).unwrap();
    }
    s
}

fn quote(field: &str) -> String {
    if field.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}
