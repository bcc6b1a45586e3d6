//! Ergodicity classification: subcritical with a finite log moment of the group size,
//! subcritical with a divergent one, and critical.
//!
//! `cargo run --release --example ergodicity_dichotomy`

use agebranch::model::{GroupSizeLaw, MemberAgeLaw, WeightedGroup};
use agebranch::solver::ergodicity_check;
use agebranch::{AgeMeasure, BranchingModel, ImmigrationMechanism, OffspringLaw};

fn main() -> agebranch::Result<()> {
    let sub = BranchingModel::constant_rate(1.0, OffspringLaw::finite(vec![0.6, 0.0, 0.4]))?;
    let critical = BranchingModel::constant_rate(1.0, OffspringLaw::binary(0.5))?;
    let newborn = MemberAgeLaw::Point { age: 0.0 };

    let cases = [
        ("subcritical, single immigrants", &sub, ImmigrationMechanism::single_immigrants(1.0, 0.0)?),
        (
            "subcritical, two group types",
            &sub,
            ImmigrationMechanism::finite(vec![
                WeightedGroup { weight: 0.5, ages: AgeMeasure::repeated(0.0, 3)? },
                WeightedGroup { weight: 0.2, ages: AgeMeasure::from_ages(vec![1.0, 4.0])? },
            ])?,
        ),
        (
            "subcritical, sizes ∝ k^-3",
            &sub,
            ImmigrationMechanism::parametric(1.0, GroupSizeLaw::Zeta { exponent: 3.0 }, newborn.clone())?,
        ),
        (
            "subcritical, sizes ∝ 1/(k ln²k)",
            &sub,
            ImmigrationMechanism::parametric(1.0, GroupSizeLaw::LogPower { power: 2.0 }, newborn)?,
        ),
        ("critical, single immigrants", &critical, ImmigrationMechanism::single_immigrants(1.0, 0.0)?),
    ];
    for (name, model, imm) in cases {
        let r = ergodicity_check(model, &imm);
        println!("{name:<34} {:?}: {}", r.verdict, r.reason);
    }
    Ok(())
}
