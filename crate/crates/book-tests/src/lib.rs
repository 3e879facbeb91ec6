//! Compiles the listings of the guide as doctests.

macro_rules! chapter {
    ($name:ident, $file:literal) => {
        #[doc = include_str!(concat!("../../../book/src/", $file))]
        pub mod $name {}
    };
}

chapter!(introduction, "introduction.md");
chapter!(geometry, "geometry.md");
chapter!(special_functions, "special-functions.md");
chapter!(heat_kernel, "heat-kernel.md");
chapter!(green, "green.md");
chapter!(poisson, "poisson.md");
chapter!(envelopes, "envelopes.md");
chapter!(simulation, "simulation.md");
chapter!(verification, "verification.md");
chapter!(cli, "cli.md");

#[doc = include_str!("../../../README.md")]
pub mod readme {}
