use std::path::Path;

use super::{parse_config, Run};
use crate::analysis::{diagnostic_report, DiagnosticParams};
use crate::bundle::{read_text, Bundle};
use crate::error::{Error, Result};
use crate::graph::io::read_partition;

pub(super) fn cmd_diag(
    run: &mut Run,
    bundle_dir: &Path,
    partition: Option<&Path>,
    config: Option<&Path>,
    seed: Option<u64>,
) -> Result<()> {
    let path = config.ok_or_else(|| Error::Config("diag needs --config with K, L, U and eta".into()))?;
    let params: DiagnosticParams = parse_config(&read_text(path)?, &path.display().to_string())?;
    let seed = seed.unwrap_or(0);
    run.set_seed(seed);
    run.set_config(&params)?;
    let bundle = run.phase("load", || Bundle::read(bundle_dir))?;
    let partition = match partition {
        Some(p) => read_partition(p)?,
        None => bundle
            .partition
            .clone()
            .ok_or_else(|| Error::Config("bundle has no partition.txt; pass --partition".into()))?,
    };
    let report = run.phase("report", || {
        diagnostic_report(&bundle.graph, &partition, &bundle.training, bundle.dim(), &params, seed)
    })?;
    run.write_json("diag.json", &report)
}
