use std::fmt::Write as _;

use super::model::FactorModel;

/// Reference blind-test component scores for two held-out traces: one that
/// matched a trained direction and one that was rejected.
pub const BLIND_TEST_REFERENCE: [(&str, [f64; 2]); 2] =
    [("matched", [0.014, 0.682]), ("rejected", [0.475, -0.42])];

/// `index,eigenvalue,subject` rows, one per eigenvalue.
pub fn eigenvalue_csv(model: &FactorModel, subject: &str) -> String {
    let mut out = String::from("index,eigenvalue,subject\n");
    for (i, l) in model.eigenvalues.iter().enumerate() {
        writeln!(out, "{},{l},{subject}", i + 1).expect("writing to a String");
    }
    out
}

/// `direction,score1,...,scoreK` rows, one per centroid.
pub fn centroid_csv(model: &FactorModel) -> String {
    let mut out = String::from("direction");
    for j in 1..=model.retained_k {
        write!(out, ",score{j}").expect("writing to a String");
    }
    out.push('\n');
    for (d, c) in &model.centroids {
        out.push_str(d.name());
        for v in c {
            write!(out, ",{v}").expect("writing to a String");
        }
        out.push('\n');
    }
    out
}

/// Fixed-width table of labelled score vectors.
pub fn format_score_table(rows: &[(String, Vec<f64>)]) -> String {
    let k = rows.iter().map(|r| r.1.len()).max().unwrap_or(0);
    let width = rows.iter().map(|r| r.0.len()).max().unwrap_or(0).max(5);
    let mut out = format!("{:<width$}", "trace");
    for j in 1..=k {
        write!(out, " {:>10}", format!("score{j}")).expect("writing to a String");
    }
    out.push('\n');
    for (name, scores) in rows {
        write!(out, "{name:<width$}").expect("writing to a String");
        for v in scores {
            write!(out, " {v:>10.3}").expect("writing to a String");
        }
        out.push('\n');
    }
    out
}

/// Score table of the model's centroids followed by the reference vectors.
pub fn score_report(model: &FactorModel) -> String {
    let mut rows: Vec<(String, Vec<f64>)> = model
        .centroids
        .iter()
        .map(|(d, c)| (format!("centroid {d}"), c.clone()))
        .collect();
    rows.extend(
        BLIND_TEST_REFERENCE
            .iter()
            .map(|(name, v)| (format!("reference {name}"), v.to_vec())),
    );
    format_score_table(&rows)
}
