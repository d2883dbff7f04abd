use fraclap::diagnostics::concentration_report;
use fraclap::domain::{BoundaryCondition, DomainSpec, Grid};
use fraclap::energy::EnergyParams;
use fraclap::solver::{minimize, SolveConfig};
use std::sync::Arc;

fn main() -> fraclap::Result<()> {
    let domain = DomainSpec::square(8.0);
    let grid = Arc::new(Grid::new(&domain, [64, 64])?);
    let bc = BoundaryCondition::Neumann;
    let cfg = SolveConfig::new(EnergyParams::new(0.5, 3.0)?);
    let sol = minimize::<f64>(&grid, &bc, &cfg)?;
    let report = concentration_report(&sol.field, &bc, 3.0, 0.01)?;
    println!("lambda = {:.6}, residual = {:.2e}, x* = {:?}", sol.lambda, sol.residual, report.x_star);
    Ok(())
}
