//! Named experiment presets. Each preset is a batch of configured members;
//! members run in isolated subdirectories and independent members may run
//! as a parallel batch.

use crate::config::ExperimentConfig;

pub const SQRT2: f64 = std::f64::consts::SQRT_2;
pub const SQRT3: f64 = 1.7320508075688772;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PresetStep {
    Classical,
    Spectrum,
    Stats,
    Concentration,
    Mixing,
}

#[derive(Debug, Clone)]
pub struct PresetMember {
    /// Subdirectory name of this member's bundle.
    pub name: String,
    pub config: ExperimentConfig,
    pub steps: Vec<PresetStep>,
}

#[derive(Debug, Clone)]
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub members: Vec<PresetMember>,
}

pub fn preset_names() -> &'static [&'static str] {
    &["fig1", "fig2a", "fig2b", "fig3", "fig4", "fig5", "fig6", "fig7", "selftest"]
}

/// Desk-scale level counts per preset are chosen so a laptop-class run
/// finishes in minutes; raise `--levels` for closer reproductions.
pub fn preset(name: &str) -> Option<Preset> {
    match name {
        "fig1" => Some(Preset {
            name: "fig1",
            description: "classical trajectory off the shifted step, configuration + angle + billiard images",
            members: vec![PresetMember {
                name: "trajectory".into(),
                config: {
                    let mut c = ExperimentConfig::default();
                    c.potential.omega1 = 1.0;
                    c.potential.omega2 = SQRT2;
                    c.step.q1_wall = -1.0;
                    c.step.q2_wall = -1.0;
                    c.classical.e1 = 5.625;
                    c.classical.e2 = 5.50;
                    c.classical.horizon_time = 200.0;
                    c.classical.sample_dt = 0.02;
                    c
                },
                steps: vec![PresetStep::Classical],
            }],
        }),
        "fig2a" => Some(Preset {
            name: "fig2a",
            description: "odd-resonance EBK ladder vs finite-difference levels (m = 1)",
            members: vec![PresetMember {
                name: "m1".into(),
                config: {
                    let mut c = ExperimentConfig::default();
                    c.potential.omega1 = 1.0;
                    c.potential.omega2 = 1.0;
                    c.solver.levels = 120;
                    c.analysis.ebk_m = 1;
                    c.analysis.collapse_degeneracies = true;
                    c
                },
                steps: vec![PresetStep::Spectrum, PresetStep::Stats],
            }],
        }),
        "fig2b" => Some(Preset {
            name: "fig2b",
            description: "even-resonance family ladders and shared-level degeneracies (m = 2)",
            members: vec![PresetMember {
                name: "m2".into(),
                config: {
                    let mut c = ExperimentConfig::default();
                    c.potential.omega1 = 1.0;
                    c.potential.omega2 = 2.0;
                    c.solver.levels = 150;
                    c.analysis.ebk_m = 2;
                    c.analysis.collapse_degeneracies = true;
                    c
                },
                steps: vec![PresetStep::Spectrum, PresetStep::Stats],
            }],
        }),
        "fig3" => Some(Preset {
            name: "fig3",
            description: "Weyl counting curves for the three resonant cases",
            members: [1.0, 2.0, 3.0]
                .into_iter()
                .map(|omega2| PresetMember {
                    name: format!("omega2_{}", omega2 as u32),
                    config: {
                        let mut c = ExperimentConfig::default();
                        c.potential.omega2 = omega2;
                        c.solver.levels = 400;
                        c.analysis.collapse_degeneracies = false;
                        c
                    },
                    steps: vec![PresetStep::Spectrum, PresetStep::Stats],
                })
                .collect(),
        }),
        "fig4" => Some(Preset {
            name: "fig4",
            description: "level-spacing statistics across the step-shift sweep (desk scale: 520 of the paper-scale 1500 levels)",
            members: [
                (0.0, 0.0),
                (0.5, 0.25),
                (1.0, 0.5),
                (1.5, 0.75),
                (SQRT3, SQRT3 / 2.0),
            ]
            .into_iter()
            .enumerate()
            .map(|(i, (e1, e2))| PresetMember {
                name: format!("eps_{i}"),
                config: {
                    let mut c = ExperimentConfig::default();
                    c.potential.omega2 = SQRT2;
                    c.potential.eps1 = e1;
                    c.potential.eps2 = e2;
                    c.solver.levels = 520;
                    c.solver.eigenvectors = false;
                    c
                },
                steps: vec![PresetStep::Spectrum, PresetStep::Stats],
            })
            .collect(),
        }),
        "fig5" => Some(Preset {
            name: "fig5",
            description: "perturbation-mixing scaling P and T against the energy-scaled tilt",
            members: vec![PresetMember {
                name: "mixing".into(),
                config: {
                    let mut c = ExperimentConfig::default();
                    c.potential.omega2 = SQRT2;
                    c.solver.levels = 420;
                    c.analysis.n_list = vec![151, 201, 251, 301];
                    c.analysis.delta_n = 10;
                    c.analysis.j_basis = 400;
                    c.analysis.delta = 0.01;
                    c.analysis.e_ref_index = 301;
                    c.analysis.eps_list = vec![
                        [0.1, 0.05],
                        [0.3, 0.15],
                        [0.6, 0.3],
                        [1.0, 0.5],
                        [1.5, 0.75],
                    ];
                    c
                },
                steps: vec![PresetStep::Mixing],
            }],
        }),
        "fig6" | "fig7" => Some(Preset {
            name: if name == "fig6" { "fig6" } else { "fig7" },
            description: "high-window wavefunction concentration: log-density fields and the Ẽ census (desk scale: window around level 500)",
            members: [
                ("eps_0", 0.0, 0.0),
                ("eps_15", 1.5, 0.75),
            ]
            .into_iter()
            .map(|(tag, e1, e2)| PresetMember {
                name: tag.into(),
                config: {
                    let mut c = ExperimentConfig::default();
                    c.potential.omega2 = SQRT2;
                    c.potential.eps1 = e1;
                    c.potential.eps2 = e2;
                    c.solver.levels = 520;
                    c.solver.eigenvectors = true;
                    c.analysis.window_lo = 481;
                    c.analysis.window_hi = 500;
                    c
                },
                steps: vec![PresetStep::Spectrum, PresetStep::Concentration],
            })
            .collect(),
        }),
        "selftest" => Some(Preset {
            name: "selftest",
            description: "fast end-to-end exercise: tiny spectrum, statistics and classical run",
            members: vec![
                PresetMember {
                    name: "classical".into(),
                    config: {
                        let mut c = ExperimentConfig::default();
                        c.potential.omega2 = SQRT2;
                        c.step.q1_wall = -1.0;
                        c.step.q2_wall = -1.0;
                        c.classical.horizon_time = 40.0;
                        c
                    },
                    steps: vec![PresetStep::Classical],
                },
                PresetMember {
                    name: "spectrum".into(),
                    config: {
                        let mut c = ExperimentConfig::default();
                        c.potential.omega2 = SQRT2;
                        c.solver.levels = 30;
                        c.solver.eigenvectors = true;
                        c.analysis.window_lo = 1;
                        c.analysis.window_hi = 10;
                        c
                    },
                    steps: vec![PresetStep::Spectrum, PresetStep::Stats, PresetStep::Concentration],
                },
            ],
        }),
        _ => None,
    }
}
