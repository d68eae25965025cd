use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, ValueEnum};
use exclusim_core::algorithms::{Algorithm, AlgorithmOutput, Norm};
use exclusim_core::harness::generators::{
    average_example_input, kcenter_example_input, lr_example_input, max_example_input, triangulation_case,
};
use exclusim_core::harness::{check_condition_i, PairedVerdict, Setting};
use exclusim_core::numerics::Rational;
use exclusim_core::protocol::{
    observed_history, safety_cap_from_env, AgentId, LabeledPoint, Message, NatureInput, ProtocolKind, Run,
    UpdatePayload,
};
use exclusim_core::strategies::{
    average_infer_history, classify_strategy_run, deflection_point, max_infer, probe_point,
    triangulation_infer_history, StrategySpec,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum DemoName {
    Average,
    Max,
    KcenterSneak,
    LrSneak,
    Triangulation,
}

#[derive(Args, Debug)]
pub struct DemoArgs {
    pub name: DemoName,
    /// Regression dimension for the triangulation demo.
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    /// Number of centers for the k-center demo.
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    #[arg(long, default_value = "1/1000", value_parser = crate::parse_rational)]
    pub eps: Rational,
    /// Generator seed for the triangulation demo.
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Write the triangulation run as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

struct Demo {
    setting: Setting,
    spec: StrategySpec,
    j: AgentId,
    input: NatureInput,
}

fn demo_for(args: &DemoArgs) -> anyhow::Result<Demo> {
    let continuous = |ell| ProtocolKind::Continuous { ell };
    Ok(match args.name {
        DemoName::Average => Demo {
            setting: Setting::new(Algorithm::Average, continuous(2), 2),
            spec: StrategySpec::AverageDoubleProbe,
            j: AgentId(1),
            input: average_example_input(),
        },
        DemoName::Max => Demo {
            setting: Setting::new(Algorithm::Max, continuous(1), 2),
            spec: StrategySpec::MaxEcho,
            j: AgentId(1),
            input: max_example_input(),
        },
        DemoName::KcenterSneak => {
            if args.k < 3 {
                bail!("the k-center sneak attack needs k >= 3");
            }
            Demo {
                setting: Setting::new(Algorithm::Kcenter { k: args.k, p: Norm::L2 }, continuous(1), 2),
                spec: StrategySpec::KcenterSneak {
                    k: args.k,
                    eps: args.eps.clone(),
                },
                j: AgentId(2),
                input: kcenter_example_input(args.k, &args.eps, false),
            }
        }
        DemoName::LrSneak => Demo {
            setting: Setting::new(Algorithm::Dlr { d: 1 }, continuous(1), 2),
            spec: StrategySpec::LrSneak,
            j: AgentId(2),
            input: lr_example_input(false),
        },
        DemoName::Triangulation => {
            if args.d == 0 {
                bail!("--d must be at least 1");
            }
            let case = triangulation_case(args.d, args.seed);
            Demo {
                setting: Setting::new(Algorithm::Dlr { d: args.d }, continuous(args.d + 2), case.agents),
                spec: StrategySpec::Triangulation { d: args.d },
                j: AgentId(2),
                input: case.input,
            }
        }
    })
}

pub fn cmd_attack_demo(args: &DemoArgs) -> anyhow::Result<ExitCode> {
    if args.csv.is_some() && args.name != DemoName::Triangulation {
        bail!("--csv is only produced by the triangulation demo");
    }
    let demo = demo_for(args)?;
    let setting = demo.setting.clone().with_cap(safety_cap_from_env());
    let strategy = demo.spec.build()?;
    let v = check_condition_i(&setting, &strategy, demo.j, &demo.input)?;
    let protocol = match setting.protocol.ell() {
        Some(ell) => format!("continuous, ell = {ell}"),
        None => "periodic".to_string(),
    };
    println!("attack: {} (agent {})", strategy.name(), demo.j);
    println!("algorithm: {}, protocol: {protocol}", setting.algorithm.describe());
    println!(
        "attack final {}, truth final {}, differs {}",
        v.attack_final, v.truth_final, v.differs
    );
    let o = observed_history(&v.run_attack, demo.j);
    let inferred = match args.name {
        DemoName::Average => Some(average_infer_history(&o)?),
        DemoName::Max => Some(max_infer(&o)),
        DemoName::Triangulation => {
            let inf = triangulation_infer_history(&o, args.d)?;
            println!("det W = {}, det M = {}", inf.w.determinant()?, inf.m.determinant()?);
            Some(inf.truth_output)
        }
        DemoName::KcenterSneak | DemoName::LrSneak => None,
    };
    match inferred {
        Some(out) => println!("inference {out}, exact match {}", out == v.truth_final),
        None => println!(
            "classification: {:?}",
            classify_strategy_run(&v.run_attack, &v.run_truth, demo.j)
        ),
    }
    if let Some(path) = &args.csv {
        write_csv(path, &v, demo.j, args.d)?;
    }
    Ok(ExitCode::SUCCESS)
}

/// Probe-sequence position of the attacker, tracked the way the strategy
/// reads its own history: a sequence restarts at the attacker's factual
/// update or at a broadcast caused by someone else.
struct Roles<'a> {
    own: &'a BTreeSet<LabeledPoint>,
    d: usize,
    step: usize,
}

impl Roles<'_> {
    fn attacker(&mut self, payload: &UpdatePayload, rho: Option<&[Rational]>) -> &'static str {
        let rows = payload.as_labeled().unwrap_or_default();
        let (Some(rho), [single]) = (rho, rows) else {
            self.step = usize::MAX;
            return if rows.iter().all(|r| self.own.contains(r)) {
                "ledger"
            } else {
                "probe"
            };
        };
        if self.step <= self.d && *single == probe_point(self.d, self.step + 1, rho) {
            self.step += 1;
            "probe"
        } else if self.step == self.d + 1 && *single == deflection_point(self.d, rho) {
            self.step = usize::MAX;
            "deflection"
        } else {
            self.step = usize::MAX;
            if self.own.contains(single) {
                "ledger"
            } else {
                "probe"
            }
        }
    }
}

fn write_csv(path: &PathBuf, v: &PairedVerdict, j: AgentId, d: usize) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    let mut header = vec!["stage".to_string(), "role".to_string()];
    header.extend((1..=d).map(|i| format!("x{i}")));
    header.push("y".into());
    header.extend((0..=d).map(|i| format!("b{i}")));
    w.write_record(&header)?;

    let run: &Run = &v.run_attack;
    let own: BTreeSet<LabeledPoint> = run
        .messages
        .iter()
        .filter_map(|m| match m {
            Message::Factual { agent, payload } if *agent == j => payload.as_labeled(),
            _ => None,
        })
        .flatten()
        .cloned()
        .collect();
    let mut roles = Roles { own: &own, d, step: 0 };
    let mut rho: Option<Vec<Rational>> = None;
    for (i, m) in run.messages.iter().enumerate() {
        // A ledger row carries the estimator broadcast right after it.
        let (role, payload) = match m {
            Message::Factual { agent, payload } if *agent == j => {
                roles.step = 0;
                ("factual", payload)
            }
            Message::Ledger { agent, payload } if *agent == j => (roles.attacker(payload, rho.as_deref()), payload),
            Message::Ledger { payload, .. } => ("ledger", payload),
            Message::Broadcast { output } => {
                rho = output.as_coefficients().map(<[Rational]>::to_vec);
                let own_update = i > 0 && matches!(&run.messages[i - 1], Message::Ledger { agent, .. } if *agent == j);
                if !own_update {
                    roles.step = 0;
                }
                continue;
            }
            Message::Factual { .. } => continue,
        };
        let estimate = match (m, run.messages.get(i + 1)) {
            (Message::Ledger { .. }, Some(Message::Broadcast { output })) => output.clone(),
            _ => rho.clone().map_or(AlgorithmOutput::Null, AlgorithmOutput::Coefficients),
        };
        for row in payload.as_labeled().unwrap_or_default() {
            let mut record = vec![(i + 1).to_string(), role.to_string()];
            record.extend(row.x[1..].iter().map(ToString::to_string));
            record.push(row.y.to_string());
            match estimate.as_coefficients() {
                Some(b) => record.extend(b.iter().map(ToString::to_string)),
                None => record.extend((0..=d).map(|_| String::new())),
            }
            w.write_record(&record)?;
        }
    }
    w.flush()?;
    Ok(())
}
