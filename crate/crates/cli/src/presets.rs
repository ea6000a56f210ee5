//! Stored experiments. Each is a configuration document; sweeps add one
//! override document per run.

pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub base: &'static str,
    /// `(run name, overrides)` for sweeps; empty for single runs.
    pub sweep: &'static [(&'static str, &'static str)],
}

const EXACT_SQ_GEODESIC: &str = "surface = sphere
cost = sq_geodesic
source = exact_axisymmetric
target = uniform
a0 = 3
sigma = 8
h = 0.05
epsilon = 0.2
outputs = potential,mapping,residuals,error_metrics
";

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "identity",
        description: "uniform to uniform on the sphere; the potential is constant",
        base: "surface = sphere\nsource = uniform\ntarget = uniform\nh = 0.1\nepsilon = 0.2\nsigma = 8\n",
        sweep: &[],
    },
    Preset {
        name: "north_south",
        description: "Gaussian mass near the north pole moved to the south pole, squared geodesic cost",
        base: "surface = sphere
cost = sq_geodesic
source = polar_gaussian_north
target = polar_gaussian_south
sigma = 1
h = 0.1
epsilon = 0.2
outputs = potential,mapping,residuals,error_metrics,cloud
",
        sweep: &[],
    },
    Preset {
        name: "peanut",
        description: "headlight source to uniform target with the reflector cost; writes the reflector",
        base: "surface = sphere
cost = log_reflector
source = headlight_peanut
target = uniform
sigma = 1
h = 0.1
epsilon = 0.2
outputs = potential,mapping,residuals,error_metrics,reflector
",
        sweep: &[],
    },
    Preset {
        name: "non_lipschitz",
        description: "Gaussian cap around +x to a discontinuous half-sphere target",
        base: "surface = sphere
cost = sq_geodesic
source = gaussian_cap_x
target = discontinuous_cap
sigma = 1
h = 0.1
epsilon = 0.2
outputs = potential,mapping,residuals,error_metrics,cloud
",
        sweep: &[],
    },
    Preset {
        name: "hemisphere",
        description: "reflector on the northern hemisphere with zero-Neumann ghosts below the equator",
        base: "surface = hemisphere
cost = log_reflector
source = hemisphere_linear
target = uniform
a0 = 10
sigma = 8
h = 0.05
epsilon = 0.2
outputs = potential,mapping,residuals,error_metrics,reflector
",
        sweep: &[],
    },
    Preset {
        name: "torus",
        description: "linear-in-z source to uniform target on the torus, Euclidean cost",
        base: "surface = torus
torus_minor = 0.65
torus_major = 1.3
cost = euclidean
source = torus_linear
target = uniform
a0 = 0.5
sigma = 8
h = 0.05
epsilon = 0.2
outputs = potential,mapping,residuals,error_metrics
",
        sweep: &[],
    },
    Preset {
        name: "torus_moving_mesh",
        description: "torus transport with a0 = 1, moving an anchor mesh",
        base: "surface = torus
torus_minor = 0.65
torus_major = 1.3
cost = euclidean
source = torus_linear
target = uniform
a0 = 1
sigma = 8
h = 0.05
epsilon = 0.2
outputs = potential,mapping,residuals,error_metrics,cloud
",
        sweep: &[],
    },
    Preset { name: "exact_sq_geodesic", description: "exact solution z/3, squared geodesic cost", base: EXACT_SQ_GEODESIC, sweep: &[] },
    Preset {
        name: "exact_sq_geodesic_a2",
        description: "exact solution z/2 with the pushforward cap check",
        base: "surface = sphere
cost = sq_geodesic
source = exact_axisymmetric
target = uniform
a0 = 2
sigma = 8
h = 0.05
epsilon = 0.2
outputs = potential,mapping,residuals,error_metrics,pushforward,cloud
",
        sweep: &[],
    },
    Preset {
        name: "exact_log_reflector",
        description: "exact solution z/3 for the reflector cost",
        base: "surface = sphere
cost = log_reflector
source = exact_axisymmetric
target = uniform
a0 = 3
sigma = 8
h = 0.05
epsilon = 0.2
outputs = potential,mapping,residuals,error_metrics,reflector
",
        sweep: &[],
    },
    Preset {
        name: "table2_eps_ratio_sweep",
        description: "epsilon/h in {2, 3, 4, 5} at h = 0.05",
        base: EXACT_SQ_GEODESIC,
        sweep: &[
            ("ratio_2", "epsilon = 0.1"),
            ("ratio_3", "epsilon = 0.15"),
            ("ratio_4", "epsilon = 0.2"),
            ("ratio_5", "epsilon = 0.25"),
        ],
    },
    Preset {
        name: "table3_sigma_sweep",
        description: "sigma in {0.25, 2, 8, 16, 64} with the reference step sizes",
        base: EXACT_SQ_GEODESIC,
        sweep: &[
            ("sigma_0.25", "sigma = 0.25\ndt = 1e-4"),
            ("sigma_2", "sigma = 2\ndt = 2.5e-5"),
            ("sigma_8", "sigma = 8\ndt = 2.5e-5"),
            ("sigma_16", "sigma = 16\ndt = 1e-5"),
            ("sigma_64", "sigma = 64\ndt = 2.5e-6"),
        ],
    },
    Preset {
        name: "table4_fixed_ratio",
        description: "epsilon/h near 2 sqrt(3) while refining",
        base: EXACT_SQ_GEODESIC,
        sweep: &[
            ("h_0.0686", "epsilon = 0.25\nh = 0.0686"),
            ("h_0.0577", "epsilon = 0.2\nh = 0.0577"),
            ("h_0.0433", "epsilon = 0.15\nh = 0.0433"),
            ("h_0.0274", "epsilon = 0.1\nh = 0.0274"),
            ("h_0.0192", "epsilon = 0.07\nh = 0.0192"),
        ],
    },
    Preset {
        name: "table5_fixed_epsilon",
        description: "epsilon = 0.2 while refining h",
        base: EXACT_SQ_GEODESIC,
        sweep: &[
            ("h_0.079", "h = 0.079"),
            ("h_0.061", "h = 0.061"),
            ("h_0.045", "h = 0.045"),
            ("h_0.031", "h = 0.031"),
            ("h_0.021", "h = 0.021"),
        ],
    },
    Preset {
        name: "table6_power_law",
        description: "epsilon = 1.6822 h^0.75 while refining",
        base: EXACT_SQ_GEODESIC,
        sweep: &[
            ("h_0.0787", "epsilon = 0.25\nh = 0.0787"),
            ("h_0.0585", "epsilon = 0.2\nh = 0.0585"),
            ("h_0.0398", "epsilon = 0.15\nh = 0.0398"),
            ("h_0.0232", "epsilon = 0.1\nh = 0.0232"),
            ("h_0.0172", "epsilon = 0.08\nh = 0.0172"),
        ],
    },
];

pub fn find(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}
