//! Presets and typed access to `key=value` settings.

use std::collections::BTreeMap;

use trisim_core::open_system::{AxisSpec, ScanAxis, ScanMethod};
use trisim_core::DriveOrder;

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Sweep,
    SpectrumPath,
    Eigenstate,
    SteadyState,
    LaplacianScan,
    Adiabaticity,
    Frustrated,
}

impl Kind {
    pub const ALL: [Kind; 7] = [
        Kind::Sweep,
        Kind::SpectrumPath,
        Kind::Eigenstate,
        Kind::SteadyState,
        Kind::LaplacianScan,
        Kind::Adiabaticity,
        Kind::Frustrated,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::Sweep => "sweep",
            Kind::SpectrumPath => "spectrum-path",
            Kind::Eigenstate => "eigenstate",
            Kind::SteadyState => "steady-state",
            Kind::LaplacianScan => "laplacian-scan",
            Kind::Adiabaticity => "adiabaticity",
            Kind::Frustrated => "frustrated",
        }
    }

    pub fn parse(s: &str) -> Option<Kind> {
        Kind::ALL.into_iter().find(|k| k.name() == s)
    }

    /// Keys accepted by this kind of run.
    pub fn keys(self) -> &'static [&'static str] {
        match self {
            Kind::Sweep => &[
                "drive_order",
                "n_sites",
                "coupling",
                "boundary",
                "delta_ini",
                "r_max",
                "t_f",
                "cutoff",
                "n_records",
                "tol",
                "leakage_threshold",
                "basis",
                "spectrum_levels",
                "spectrum_cutoff",
            ],
            Kind::SpectrumPath => &[
                "drive_order",
                "delta_ini",
                "r_max",
                "points",
                "levels",
                "cutoff",
            ],
            Kind::Eigenstate => &[
                "drive_order",
                "r",
                "delta",
                "cutoff",
                "half_width",
                "grid_points",
            ],
            Kind::SteadyState => &[
                "drive_order",
                "r",
                "delta",
                "kappa",
                "nbar",
                "cutoff",
                "half_width",
                "grid_points",
                "fpe_points",
            ],
            Kind::LaplacianScan => &[
                "drive_order",
                "r",
                "delta",
                "kappa",
                "nbar",
                "cutoff",
                "axis1",
                "axis2",
                "methods",
            ],
            Kind::Adiabaticity => &[
                "n_sites",
                "grid",
                "v_range",
                "delta_ini",
                "delta_ini_range",
                "doubling_r",
                "doubling_tf",
                "doubling_tf_range",
                "doubling_cutoff",
                "tripling_r",
                "tripling_tf",
                "tripling_tf_range",
                "tripling_cutoff",
                "n_records",
                "leakage_threshold",
            ],
            Kind::Frustrated => &["r", "delta", "v", "cutoff", "levels"],
        }
    }
}

pub struct Preset {
    pub name: &'static str,
    pub kind: Kind,
    pub description: &'static str,
    base: &'static [(&'static str, &'static str)],
    changes: &'static [(&'static str, &'static str)],
}

impl Preset {
    pub fn defaults(&self) -> BTreeMap<String, String> {
        self.base
            .iter()
            .chain(self.changes)
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }
}

const TRIPLING_SWEEP: &[(&str, &str)] = &[
    ("drive_order", "tripling"),
    ("n_sites", "3"),
    ("coupling", "0.4"),
    ("boundary", "ring"),
    ("delta_ini", "6"),
    ("r_max", "1.4"),
    ("t_f", "100"),
    ("cutoff", "24"),
    ("n_records", "201"),
    ("tol", "1e-8"),
    ("leakage_threshold", "1e-4"),
    ("basis", "auto"),
    ("spectrum_levels", "27"),
    ("spectrum_cutoff", "20"),
];

const STEADY: &[(&str, &str)] = &[
    ("drive_order", "tripling"),
    ("r", "1"),
    ("delta", "0"),
    ("kappa", "0.5"),
    ("nbar", "0"),
    ("cutoff", "40"),
    ("half_width", "auto"),
    ("grid_points", "121"),
    ("fpe_points", "81"),
];

const SCAN: &[(&str, &str)] = &[
    ("drive_order", "tripling"),
    ("r", "0"),
    ("delta", "0"),
    ("kappa", "0.5"),
    ("nbar", "0"),
    ("cutoff", "40"),
    ("axis1", "r:0:2:21"),
    ("axis2", "kappa:0.05:1:20"),
    ("methods", "quantum"),
];

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "fig1b",
        kind: Kind::Eigenstate,
        description: "classical energy surface and Wigner function of the lowest symmetric eigenstate",
        base: &[
            ("drive_order", "tripling"),
            ("r", "1.4"),
            ("delta", "0"),
            ("cutoff", "40"),
            ("half_width", "auto"),
            ("grid_points", "121"),
        ],
        changes: &[],
    },
    Preset {
        name: "fig1c",
        kind: Kind::SpectrumPath,
        description: "single-oscillator levels along the sweep path",
        base: &[
            ("drive_order", "tripling"),
            ("delta_ini", "6"),
            ("r_max", "1.4"),
            ("points", "141"),
            ("levels", "30"),
            ("cutoff", "40"),
        ],
        changes: &[],
    },
    Preset {
        name: "fig2-ferro",
        kind: Kind::Sweep,
        description: "three-site ferromagnetic ring: sweep and final spectrum",
        base: TRIPLING_SWEEP,
        changes: &[],
    },
    Preset {
        name: "fig2-antiferro",
        kind: Kind::Sweep,
        description: "three-site antiferromagnetic ring: sweep and final spectrum",
        base: TRIPLING_SWEEP,
        changes: &[("coupling", "-0.4")],
    },
    Preset {
        name: "fig3-ferro",
        kind: Kind::Sweep,
        description: "four-site ferromagnetic ring sweep",
        base: TRIPLING_SWEEP,
        changes: &[("n_sites", "4"), ("cutoff", "22"), ("spectrum_levels", "0")],
    },
    Preset {
        name: "fig3-antiferro",
        kind: Kind::Sweep,
        description: "four-site antiferromagnetic ring sweep",
        base: TRIPLING_SWEEP,
        changes: &[("n_sites", "4"), ("coupling", "-0.4"), ("cutoff", "22"), ("spectrum_levels", "0")],
    },
    Preset {
        name: "fig4a",
        kind: Kind::LaplacianScan,
        description: "origin Laplacian of the steady state over drive and damping",
        base: SCAN,
        changes: &[],
    },
    Preset {
        name: "fig4b",
        kind: Kind::LaplacianScan,
        description: "quantum and semiclassical origin Laplacian along the drive at kappa = 0.5",
        base: SCAN,
        changes: &[("axis1", "r:0:2:41"), ("axis2", "none"), ("methods", "quantum,semiclassical")],
    },
    Preset {
        name: "fig4cd",
        kind: Kind::SteadyState,
        description: "quantum and semiclassical steady-state Wigner functions at r = 1",
        base: STEADY,
        changes: &[],
    },
    Preset {
        name: "figA1-2osc",
        kind: Kind::Sweep,
        description: "two-site chain, both coupling signs: sweeps and final spectra",
        base: TRIPLING_SWEEP,
        changes: &[
            ("n_sites", "2"),
            ("coupling", "0.4,-0.4"),
            ("boundary", "chain"),
            ("spectrum_levels", "9"),
            ("spectrum_cutoff", "24"),
        ],
    },
    Preset {
        name: "figA2-scans",
        kind: Kind::LaplacianScan,
        description: "origin Laplacian over drive and thermal occupation, and over drive and detuning, at weak damping",
        base: SCAN,
        changes: &[("kappa", "0.01"), ("axis2", "nbar:0:1:21;delta:0:1:21")],
    },
    Preset {
        name: "figA3-wigner-pair",
        kind: Kind::SteadyState,
        description: "quantum and semiclassical steady-state Wigner functions at r = 0.75",
        base: STEADY,
        changes: &[("r", "0.75")],
    },
    Preset {
        name: "figC-doubling-sweeps",
        kind: Kind::Sweep,
        description: "period-doubling sweeps for three- and four-site rings, both coupling signs",
        base: TRIPLING_SWEEP,
        changes: &[
            ("drive_order", "doubling"),
            ("n_sites", "3,4"),
            ("coupling", "0.4,-0.4"),
            ("r_max", "2"),
            ("t_f", "25"),
            ("cutoff", "20,14"),
            ("spectrum_levels", "0"),
        ],
    },
    Preset {
        name: "figC-2dscans",
        kind: Kind::Adiabaticity,
        description: "final probability of the ideal ferromagnetic configurations over coupling and sweep parameters",
        base: &[
            ("n_sites", "3"),
            ("grid", "21"),
            ("v_range", "0:1"),
            ("delta_ini", "6"),
            ("delta_ini_range", "-2:6"),
            ("doubling_r", "2"),
            ("doubling_tf", "12"),
            ("doubling_tf_range", "2:40"),
            ("doubling_cutoff", "16"),
            ("tripling_r", "1.4"),
            ("tripling_tf", "30"),
            ("tripling_tf_range", "10:100"),
            ("tripling_cutoff", "20"),
            ("n_records", "2"),
            ("leakage_threshold", "1e-3"),
        ],
        changes: &[],
    },
    Preset {
        name: "frustrated-triangle",
        kind: Kind::Frustrated,
        description: "triangle with one antiferromagnetic bond: spectrum, dominant orbit, configuration energies",
        base: &[("r", "1.4"), ("delta", "0"), ("v", "0.4"), ("cutoff", "20"), ("levels", "27")],
        changes: &[],
    },
];

pub fn find_preset(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

/// Effective settings of one run.
#[derive(Clone, Debug)]
pub struct Settings {
    pub kind: Kind,
    pub values: BTreeMap<String, String>,
}

impl Settings {
    /// Preset defaults overridden by `overrides`; without a preset every
    /// key of the kind named by `kind=` must be given.
    pub fn resolve(
        preset: Option<&Preset>,
        overrides: &[(String, String)],
    ) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        let kind = match preset {
            Some(p) => {
                values = p.defaults();
                p.kind
            }
            None => {
                let name = overrides
                    .iter()
                    .rev()
                    .find(|(k, _)| k == "kind")
                    .map(|(_, v)| v.as_str())
                    .ok_or_else(|| {
                        CliError::Usage("without --preset, --set kind=<kind> is required".into())
                    })?;
                Kind::parse(name).ok_or_else(|| {
                    let kinds: Vec<_> = Kind::ALL.iter().map(|k| k.name()).collect();
                    CliError::Usage(format!(
                        "unknown kind '{name}'; expected one of {}",
                        kinds.join(", ")
                    ))
                })?
            }
        };
        for (k, v) in overrides {
            if k == "kind" {
                if preset.is_some() && v != kind.name() {
                    return Err(CliError::Usage(format!(
                        "preset is of kind '{}'",
                        kind.name()
                    )));
                }
                continue;
            }
            if !kind.keys().contains(&k.as_str()) {
                return Err(CliError::Usage(format!(
                    "unknown key '{k}' for a {} run; accepted keys: {}",
                    kind.name(),
                    kind.keys().join(", ")
                )));
            }
            values.insert(k.clone(), v.clone());
        }
        let missing: Vec<&str> = kind
            .keys()
            .iter()
            .copied()
            .filter(|k| !values.contains_key(*k))
            .collect();
        if !missing.is_empty() {
            return Err(CliError::Usage(format!(
                "missing settings: {}",
                missing.join(", ")
            )));
        }
        Ok(Self { kind, values })
    }

    fn raw(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or("")
    }

    fn bad(&self, key: &str, what: &str) -> CliError {
        CliError::Usage(format!("{key} = '{}': expected {what}", self.raw(key)))
    }

    pub fn f64(&self, key: &str) -> Result<f64, CliError> {
        self.raw(key)
            .trim()
            .parse()
            .map_err(|_| self.bad(key, "a number"))
    }

    /// A number, or `None` for `auto`.
    pub fn f64_or_auto(&self, key: &str) -> Result<Option<f64>, CliError> {
        if self.raw(key).trim() == "auto" {
            Ok(None)
        } else {
            self.f64(key).map(Some)
        }
    }

    pub fn usize(&self, key: &str) -> Result<usize, CliError> {
        self.raw(key)
            .trim()
            .parse()
            .map_err(|_| self.bad(key, "a non-negative integer"))
    }

    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>, CliError> {
        self.raw(key)
            .split(',')
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|_| self.bad(key, "comma-separated numbers"))
            })
            .collect()
    }

    pub fn usize_list(&self, key: &str) -> Result<Vec<usize>, CliError> {
        self.raw(key)
            .split(',')
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|_| self.bad(key, "comma-separated integers"))
            })
            .collect()
    }

    /// `lo:hi`.
    pub fn range(&self, key: &str) -> Result<(f64, f64), CliError> {
        let parts: Vec<&str> = self.raw(key).split(':').collect();
        match parts.as_slice() {
            [a, b] => match (a.trim().parse(), b.trim().parse()) {
                (Ok(a), Ok(b)) => Ok((a, b)),
                _ => Err(self.bad(key, "lo:hi")),
            },
            _ => Err(self.bad(key, "lo:hi")),
        }
    }

    pub fn drive_order(&self) -> Result<DriveOrder, CliError> {
        match self.raw("drive_order").trim() {
            "tripling" => Ok(DriveOrder::Tripling),
            "doubling" => Ok(DriveOrder::Doubling),
            _ => Err(self.bad("drive_order", "tripling or doubling")),
        }
    }

    pub fn word<'a>(&self, key: &str, allowed: &[&'a str]) -> Result<&'a str, CliError> {
        let v = self.raw(key).trim();
        allowed
            .iter()
            .copied()
            .find(|a| *a == v)
            .ok_or_else(|| self.bad(key, &allowed.join(" or ")))
    }

    /// `axis:start:stop:points`.
    pub fn axis(&self, key: &str, text: &str) -> Result<AxisSpec, CliError> {
        let bad = || {
            CliError::Usage(format!(
                "{key}: '{text}' is not of the form axis:start:stop:points"
            ))
        };
        let parts: Vec<&str> = text.split(':').map(str::trim).collect();
        let [name, a, b, n] = parts.as_slice() else {
            return Err(bad());
        };
        let axis = match *name {
            "r" => ScanAxis::R,
            "kappa" => ScanAxis::Kappa,
            "nbar" => ScanAxis::Nbar,
            "delta" => ScanAxis::Delta,
            _ => return Err(bad()),
        };
        let (a, b, n) = (
            a.parse().map_err(|_| bad())?,
            b.parse().map_err(|_| bad())?,
            n.parse().map_err(|_| bad())?,
        );
        AxisSpec::new(axis, a, b, n).map_err(|e| CliError::Usage(format!("{key}: {e}")))
    }

    pub fn axis2_list(&self) -> Result<Vec<Option<AxisSpec>>, CliError> {
        let raw = self.raw("axis2").trim();
        if raw == "none" {
            return Ok(vec![None]);
        }
        raw.split(';')
            .map(|t| self.axis("axis2", t).map(Some))
            .collect()
    }

    pub fn methods(&self) -> Result<Vec<ScanMethod>, CliError> {
        self.raw("methods")
            .split(',')
            .map(|m| match m.trim() {
                "quantum" => Ok(ScanMethod::Quantum),
                "semiclassical" => Ok(ScanMethod::Semiclassical),
                _ => Err(self.bad("methods", "quantum and/or semiclassical")),
            })
            .collect()
    }
}
