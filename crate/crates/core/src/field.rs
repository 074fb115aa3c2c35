//! Lazily evaluated tensor fields on a chart.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::chart::{Chart, PointSample};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::jet::{Jet, MultiIndex};
use crate::projective::Connection;
use crate::tensor::{multi_indices, Slot, TensorJet, Weight};

type Evaluator = dyn Fn(&[f64], usize) -> Result<TensorJet> + Send + Sync;

/// All raw partial derivatives of `field` up to the sample's order, keyed by
/// multi-index (`(1,0)` is `∂/∂x1`). Values are plain partials, not divided
/// by factorials.
pub fn jet_evaluate(field: &Expr, chart: &Chart, sample: &PointSample) -> Result<BTreeMap<MultiIndex, f64>> {
    chart.check_point(&sample.point)?;
    if field.arity() > chart.dim() {
        return Err(Error::Shape(format!("expression uses x{} on a {}-chart", field.arity(), chart.dim())));
    }
    let jet = field.jet(&sample.point, sample.order)?;
    Ok(jet.raw_partials().into_iter().collect())
}

/// Tensor field of fixed valence and density weight. Components are produced
/// on demand as jets at a point.
#[derive(Clone)]
pub struct WeightedTensorField {
    chart: Chart,
    slots: Vec<Slot>,
    weight: Weight,
    eval: Arc<Evaluator>,
}

impl fmt::Debug for WeightedTensorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WeightedTensorField")
            .field("dim", &self.chart.dim())
            .field("slots", &self.slots)
            .field("weight", &self.weight)
            .finish()
    }
}

impl WeightedTensorField {
    /// Field from a closure `(point, order) -> components`. The closure must
    /// return jets in `dim` variables with the requested shape.
    pub fn from_fn(
        chart: Chart,
        slots: Vec<Slot>,
        weight: Weight,
        f: impl Fn(&[f64], usize) -> Result<TensorJet> + Send + Sync + 'static,
    ) -> Self {
        WeightedTensorField { chart, slots, weight, eval: Arc::new(f) }
    }

    /// Field with expression components in row-major slot order.
    pub fn from_exprs(chart: Chart, slots: Vec<Slot>, weight: Weight, comps: Vec<Expr>) -> Result<Self> {
        let n = chart.dim();
        let expected = n.pow(slots.len() as u32);
        if comps.len() != expected {
            return Err(Error::Shape(format!("expected {expected} component expressions, got {}", comps.len())));
        }
        if let Some(e) = comps.iter().find(|e| e.arity() > n) {
            return Err(Error::Shape(format!("component {e} uses a coordinate beyond x{n}")));
        }
        let comps = Arc::new(comps);
        let shape = slots.clone();
        Ok(Self::from_fn(chart, slots, weight, move |x, order| {
            let jets = comps.iter().map(|e| e.jet(x, order)).collect::<Result<Vec<_>>>()?;
            TensorJet::new(n, shape.clone(), weight, jets)
        }))
    }

    pub fn scalar(chart: Chart, expr: Expr, weight: Weight) -> Result<Self> {
        Self::from_exprs(chart, Vec::new(), weight, vec![expr])
    }

    pub fn zero(chart: Chart, slots: Vec<Slot>, weight: Weight) -> Self {
        let n = chart.dim();
        let shape = slots.clone();
        Self::from_fn(chart, slots, weight, move |_, order| {
            Ok(TensorJet::from_fn(n, shape.clone(), weight, |_| Jet::zero(n, order)))
        })
    }

    /// Same components read as a density of weight `w` in the chart gauge.
    pub fn reweighted(&self, w: Weight) -> Self {
        let mut f = self.clone();
        f.weight = w;
        f
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn weight(&self) -> Weight {
        self.weight
    }

    /// Components at `x` as jets up to `order`.
    pub fn jet(&self, x: &[f64], order: usize) -> Result<TensorJet> {
        self.chart.check_point(x)?;
        Jet::check_order(order)?;
        self.jet_unchecked(x, order)
    }

    /// Like [`jet`](Self::jet) without the domain test; used when a field is
    /// evaluated inside another field's evaluation.
    pub(crate) fn jet_unchecked(&self, x: &[f64], order: usize) -> Result<TensorJet> {
        let t = (self.eval)(x, order)?;
        if t.slots() != self.slots.as_slice() || t.dim() != self.dim() {
            return Err(Error::Shape(format!(
                "field evaluator returned slots {:?}, declared {:?}",
                t.slots(),
                self.slots
            )));
        }
        Ok(t.with_weight(self.weight))
    }

    pub fn values(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.jet(x, 0)?.values())
    }

    fn check_chart(&self, other: &WeightedTensorField) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::Shape(format!("chart dimensions {} and {}", self.dim(), other.dim())));
        }
        Ok(())
    }

    fn derived(&self, slots: Vec<Slot>, weight: Weight, f: impl Fn(&[f64], usize) -> Result<TensorJet> + Send + Sync + 'static) -> Self {
        Self::from_fn(self.chart, slots, weight, f)
    }

    pub fn product(&self, other: &WeightedTensorField) -> Result<Self> {
        self.check_chart(other)?;
        let mut slots = self.slots.clone();
        slots.extend_from_slice(&other.slots);
        let (a, b) = (self.clone(), other.clone());
        Ok(self.derived(slots, self.weight + other.weight, move |x, k| {
            a.jet_unchecked(x, k)?.product(&b.jet_unchecked(x, k)?)
        }))
    }

    pub fn add(&self, other: &WeightedTensorField) -> Result<Self> {
        self.check_chart(other)?;
        if self.slots != other.slots || self.weight != other.weight {
            return Err(Error::Shape("sum of fields with different valence or weight".into()));
        }
        let (a, b) = (self.clone(), other.clone());
        Ok(self.derived(self.slots.clone(), self.weight, move |x, k| {
            a.jet_unchecked(x, k)?.add(&b.jet_unchecked(x, k)?)
        }))
    }

    pub fn sub(&self, other: &WeightedTensorField) -> Result<Self> {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Self {
        let a = self.clone();
        self.derived(self.slots.clone(), self.weight, move |x, k| Ok(a.jet_unchecked(x, k)?.scale(s)))
    }

    pub fn contract(&self, up: usize, down: usize) -> Result<Self> {
        // validate eagerly on a symbolic shape
        let probe = TensorJet::from_fn(self.dim(), self.slots.clone(), self.weight, |_| Jet::zero(1, 0));
        let slots = probe.contract(up, down)?.slots().to_vec();
        let a = self.clone();
        Ok(self.derived(slots, self.weight, move |x, k| a.jet_unchecked(x, k)?.contract(up, down)))
    }

    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        let probe = TensorJet::from_fn(self.dim(), self.slots.clone(), self.weight, |_| Jet::zero(1, 0));
        let slots = probe.permute(perm)?.slots().to_vec();
        let (a, perm) = (self.clone(), perm.to_vec());
        Ok(self.derived(slots, self.weight, move |x, k| a.jet_unchecked(x, k)?.permute(&perm)))
    }

    pub fn symmetrize(&self, group: &[usize]) -> Result<Self> {
        self.group_op(group, false)
    }

    pub fn alternate(&self, group: &[usize]) -> Result<Self> {
        self.group_op(group, true)
    }

    fn group_op(&self, group: &[usize], alt: bool) -> Result<Self> {
        let probe = TensorJet::from_fn(self.dim(), self.slots.clone(), self.weight, |_| Jet::zero(1, 0));
        if alt {
            probe.alternate(group)?;
        } else {
            probe.symmetrize(group)?;
        }
        let (a, group) = (self.clone(), group.to_vec());
        Ok(self.derived(self.slots.clone(), self.weight, move |x, k| {
            let t = a.jet_unchecked(x, k)?;
            if alt {
                t.alternate(&group)
            } else {
                t.symmetrize(&group)
            }
        }))
    }

    /// Lowers contravariant slot `slot` with a `(0,2)` form.
    pub fn lower(&self, slot: usize, form: &WeightedTensorField) -> Result<Self> {
        self.move_slot(slot, form, Slot::Up)
    }

    /// Raises covariant slot `slot` with the inverse of a `(0,2)` form. A form
    /// that is singular at an evaluation point yields `SingularForm` there.
    pub fn raise(&self, slot: usize, form: &WeightedTensorField) -> Result<Self> {
        self.move_slot(slot, form, Slot::Down)
    }

    fn move_slot(&self, slot: usize, form: &WeightedTensorField, from: Slot) -> Result<Self> {
        self.check_chart(form)?;
        if slot >= self.slots.len() || self.slots[slot] != from || form.slots != [Slot::Down, Slot::Down] {
            return Err(Error::Shape(format!("cannot move slot {slot} of {:?} with a {:?} form", self.slots, form.slots)));
        }
        let mut slots = self.slots.clone();
        let weight = match from {
            Slot::Up => {
                slots[slot] = Slot::Down;
                self.weight + form.weight
            }
            Slot::Down => {
                slots[slot] = Slot::Up;
                self.weight - form.weight
            }
        };
        let (a, g) = (self.clone(), form.clone());
        Ok(self.derived(slots, weight, move |x, k| {
            let t = a.jet_unchecked(x, k)?;
            let g = g.jet_unchecked(x, k)?;
            match from {
                Slot::Up => t.lower(slot, &g),
                Slot::Down => t.raise(slot, &g, x),
            }
        }))
    }

    /// Covariant derivative with respect to `conn`; the new covariant slot
    /// is slot 0 and the weight is unchanged.
    pub fn covariant_derivative(&self, conn: &Connection) -> Result<Self> {
        if conn.dim() != self.dim() {
            return Err(Error::Shape(format!("connection on a {}-chart, field on a {}-chart", conn.dim(), self.dim())));
        }
        let mut slots = vec![Slot::Down];
        slots.extend_from_slice(&self.slots);
        let (a, conn) = (self.clone(), conn.clone());
        Ok(self.derived(slots, self.weight, move |x, k| {
            let t = a.jet_unchecked(x, k + 1)?;
            let gamma = conn.gamma_jet(x, k)?;
            t.covariant_derivative(&gamma, x.len())
        }))
    }

    /// Component-wise values of `self − other` at `x`, max-abs.
    pub fn max_abs_diff_at(&self, other: &WeightedTensorField, x: &[f64]) -> Result<f64> {
        self.jet(x, 0)?.max_abs_diff(&other.jet(x, 0)?)
    }
}

/// Convenience: identity `(1,1)` tensor field.
pub fn kronecker(chart: Chart) -> WeightedTensorField {
    let n = chart.dim();
    WeightedTensorField::from_fn(chart, vec![Slot::Up, Slot::Down], Weight::from_integer(0), move |_, k| {
        Ok(TensorJet::from_fn(n, vec![Slot::Up, Slot::Down], Weight::from_integer(0), |i| {
            Jet::constant(n, k, if i[0] == i[1] { 1.0 } else { 0.0 })
        }))
    })
}

/// Row-major multi-indices of a field's components (for reporting).
pub fn component_labels(dim: usize, rank: usize) -> Vec<Vec<usize>> {
    multi_indices(rank, dim).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::weight;

    #[test]
    fn product_of_coordinates() {
        let chart = Chart::euclidean(2).unwrap();
        let f = Expr::parse("x1*x2", 2).unwrap();
        let sample = PointSample::new(&chart, vec![2.0, 3.0], 1).unwrap();
        let d = jet_evaluate(&f, &chart, &sample).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d[&vec![0, 0]], 6.0);
        assert_eq!(d[&vec![1, 0]], 3.0);
        assert_eq!(d[&vec![0, 1]], 2.0);
    }

    #[test]
    fn constant_has_no_derivatives() {
        let chart = Chart::euclidean(3).unwrap();
        let sample = PointSample::new(&chart, vec![0.3, -1.0, 2.0], 3).unwrap();
        let d = jet_evaluate(&Expr::constant(5.0), &chart, &sample).unwrap();
        assert_eq!(d.len(), 20);
        for (alpha, v) in d {
            let expected = if alpha.iter().all(|&a| a == 0) { 5.0 } else { 0.0 };
            assert_eq!(v, expected);
        }
    }

    #[test]
    fn out_of_domain_point_rejected() {
        let chart = Chart::unit_ball(2).unwrap();
        let f = WeightedTensorField::scalar(chart, Expr::var(0), weight(0)).unwrap();
        assert!(matches!(f.jet(&[2.0, 0.0], 1), Err(Error::Domain(_))));
        assert!(matches!(f.jet(&[0.0, 0.0], 5), Err(Error::Order { .. })));
    }

    #[test]
    fn trace_of_identity_field() {
        let chart = Chart::euclidean(3).unwrap();
        let tr = kronecker(chart).contract(0, 1).unwrap();
        assert_eq!(tr.values(&[0.1, 0.2, 0.3]).unwrap(), vec![3.0]);
    }

    #[test]
    fn field_weights_add_under_product() {
        let chart = Chart::euclidean(2).unwrap();
        let s = WeightedTensorField::scalar(chart, Expr::var(0), weight(1)).unwrap();
        let t = WeightedTensorField::zero(chart, vec![Slot::Down], weight(-3));
        let p = s.product(&t).unwrap();
        assert_eq!(p.weight(), weight(-2));
        assert_eq!(p.jet(&[0.0, 0.0], 0).unwrap().weight(), weight(-2));
    }

    #[test]
    fn raising_with_singular_form_reports_point() {
        let chart = Chart::euclidean(2).unwrap();
        let g = WeightedTensorField::from_exprs(
            chart,
            vec![Slot::Down, Slot::Down],
            weight(0),
            vec![Expr::var(0), Expr::zero(), Expr::zero(), Expr::constant(1.0)],
        )
        .unwrap();
        let v = WeightedTensorField::zero(chart, vec![Slot::Down], weight(0));
        let raised = v.raise(0, &g).unwrap();
        assert!(raised.jet(&[0.5, 0.0], 0).is_ok());
        assert_eq!(raised.jet(&[0.0, 0.0], 0).unwrap_err(), Error::SingularForm { point: vec![0.0, 0.0] });
    }
}
