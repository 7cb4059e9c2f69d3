use crate::error::{Error, Result};
use crate::grid::{DiscreteDomain, Field};
use crate::scalar::{norm, Real};

/// `min(k, |F|) F / |F|` on cells whose centre lies in `B_radius(origin)`, zero elsewhere.
///
/// `radius` defaults to `k`. Magnitudes are Frobenius norms of the per-cell record.
pub fn truncate_forcing<S: Real>(
    field: &Field<S>,
    k: S,
    dom: &DiscreteDomain<S>,
    radius: Option<S>,
) -> Result<Field<S>> {
    if !(k > S::zero()) {
        return Err(Error::InvalidArgument(format!("truncation level must be positive, got {k}")));
    }
    dom.check_field(field)?;
    let radius = radius.unwrap_or(k);
    let mut out = field.clone();
    for c in 0..dom.num_cells() {
        let rec = out.cell_mut(c);
        if dom.radius_of(c) >= radius {
            rec.iter_mut().for_each(|v| *v = S::zero());
            continue;
        }
        let m = norm(rec);
        if m > k {
            let scale = k / m;
            rec.iter_mut().for_each(|v| *v = *v * scale);
        }
    }
    Ok(out)
}
