//! Agent models used in the continuous- and discrete-time experiments.

use nalgebra::DMatrix;

use crate::agent::{AgentModel, TimeDomain};
use crate::error::{Error, Result};

pub const BUILTIN_MODEL_NAMES: [&str; 9] = [
    "ct1",
    "ct2",
    "ct3",
    "ct-target",
    "dt1",
    "dt2",
    "dt3",
    "dt4",
    "dt-target",
];

fn m(rows: usize, cols: usize, data: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(rows, cols, data)
}

fn model(
    td: TimeDomain,
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    c_m: Option<DMatrix<f64>>,
) -> AgentModel {
    AgentModel::new(td, a, b, c, c_m).expect("builtin model dimensions")
}

// Triple integrator, shared by ct2 and dt2.
fn triple_chain(td: TimeDomain) -> AgentModel {
    model(
        td,
        m(3, 3, &[0., 1., 0., 0., 0., 1., 0., 0., 0.]),
        m(3, 1, &[0., 0., 1.]),
        m(1, 3, &[1., 0., 0.]),
        Some(m(1, 3, &[1., 1., 0.])),
    )
}

pub fn builtin_model(name: &str) -> Result<AgentModel> {
    use TimeDomain::{Continuous as Ct, Discrete as Dt};
    let model = match name {
        "ct1" => model(
            Ct,
            m(
                4,
                4,
                &[
                    0., 1., 0., 0., //
                    0., 0., 1., 0., //
                    0., 0., 0., 1., //
                    0., 0., 0., 0.,
                ],
            ),
            m(4, 2, &[0., 1., 0., 0., 1., 0., 0., 1.]),
            m(1, 4, &[1., 0., 0., 0.]),
            Some(m(1, 4, &[1., 1., 0., 0.])),
        ),
        "ct2" => triple_chain(Ct),
        "ct3" => model(
            Ct,
            m(
                5,
                5,
                &[
                    -1., 0., 0., -1., 0., //
                    0., 0., 1., 1., 0., //
                    0., 1., -1., 1., 0., //
                    0., 0., 0., 1., 1., //
                    -1., 1., 0., 1., 1.,
                ],
            ),
            m(5, 2, &[0., 0., 0., 0., 0., 1., 0., 0., 1., 0.]),
            m(1, 5, &[0., 0., 0., 1., 0.]),
            Some(m(1, 5, &[1., 1., 0., 0., 0.])),
        ),
        "ct-target" => model(
            Ct,
            m(3, 3, &[0., 1., 0., 0., 0., 1., 0., -1., 0.]),
            m(3, 1, &[0., 0., 1.]),
            m(1, 3, &[1., 0., 0.]),
            None,
        ),
        "dt1" => model(
            Dt,
            m(
                4,
                4,
                &[
                    0., 1., 0., 0., //
                    0., 0., 1., 0., //
                    -1., 0., 0., -1., //
                    0., -1., 0., 0.,
                ],
            ),
            m(4, 2, &[0., 0., 0., 0., 0., 1., 1., 0.]),
            m(1, 4, &[0., 0., 0., 1.]),
            Some(m(1, 4, &[0., -1., 0., 1.])),
        ),
        "dt2" => triple_chain(Dt),
        "dt3" => model(
            Dt,
            m(2, 2, &[0., 1., 0., 0.]),
            m(2, 1, &[0., 1.]),
            m(1, 2, &[1., 0.]),
            Some(m(1, 2, &[1., 1.])),
        ),
        "dt4" => model(
            Dt,
            m(2, 2, &[0., 1., -2., -2.]),
            m(2, 1, &[0., 1.]),
            m(1, 2, &[1., 0.]),
            Some(m(1, 2, &[1., 1.])),
        ),
        "dt-target" => model(
            Dt,
            m(3, 3, &[0., 1., 0., 0., 0., 1., 1., -2., 2.]),
            m(3, 1, &[0., 0., 1.]),
            m(1, 3, &[1., 0., 0.]),
            None,
        ),
        other => return Err(Error::UnknownModel(other.to_string())),
    };
    Ok(model)
}

struct InOrder(Vec<(&'static str, AgentModel)>);

impl serde::Serialize for InOrder {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_map(self.0.iter().map(|(k, v)| (k, v)))
    }
}

/// Pretty JSON object `{name: model}` over all builtin models, in
/// [`BUILTIN_MODEL_NAMES`] order.
pub fn builtin_models_json() -> String {
    let models = BUILTIN_MODEL_NAMES
        .iter()
        .map(|&name| (name, builtin_model(name).expect("listed builtin")))
        .collect();
    let mut s = serde_json::to_string_pretty(&InOrder(models)).expect("json serializes");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::{assemble_closed_loop, DynamicProtocol};

    #[test]
    fn ct2_matrices() {
        let md = builtin_model("ct2").unwrap();
        assert_eq!(md.a, m(3, 3, &[0., 1., 0., 0., 0., 1., 0., 0., 0.]));
        assert_eq!(md.b, m(3, 1, &[0., 0., 1.]));
        assert_eq!(md.c, m(1, 3, &[1., 0., 0.]));
        assert_eq!(md.c_m, Some(m(1, 3, &[1., 1., 0.])));
        assert_eq!(md.time_domain, TimeDomain::Continuous);
    }

    #[test]
    fn dt4_and_ct_target() {
        let md = builtin_model("dt4").unwrap();
        assert_eq!(md.a, m(2, 2, &[0., 1., -2., -2.]));
        assert_eq!(md.c_m, Some(m(1, 2, &[1., 1.])));
        let t = builtin_model("ct-target").unwrap();
        assert_eq!(t.a, m(3, 3, &[0., 1., 0., 0., 0., 1., 0., -1., 0.]));
        assert!(t.c_m.is_none());
    }

    #[test]
    fn unknown_name() {
        assert!(matches!(builtin_model("ct9"), Err(Error::UnknownModel(_))));
    }

    #[test]
    fn ct2_closed_loop_shape() {
        let md = builtin_model("ct2").unwrap();
        let q = 3;
        let pr = DynamicProtocol {
            k: -DMatrix::identity(q, q),
            g_zeta: DMatrix::from_element(q, 1, 1.0),
            g_eta: DMatrix::zeros(q, 0),
            g_meas: DMatrix::from_element(q, 1, 0.5),
            m: DMatrix::from_element(1, q, -1.0),
            n: DMatrix::zeros(0, q),
        };
        let cl = assemble_closed_loop(&md, &pr).unwrap();
        assert_eq!(cl.a_t().shape(), (6, 6));
        assert_eq!(cl.a_t().view((0, 0), (3, 3)).into_owned(), md.a);
    }

    #[test]
    fn all_outputs_scalar() {
        for name in BUILTIN_MODEL_NAMES {
            assert_eq!(builtin_model(name).unwrap().output_dim(), 1, "{name}");
        }
    }
}
