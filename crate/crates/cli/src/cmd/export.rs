use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;
use gyrocal::net::weights::{FORMAT_VERSION, FRAMING_LEN, HEADER_LEN};
use gyrocal::net::{param_count, read_weights, write_weights};

use crate::config::Resolver;
use crate::error::CliError;
use crate::manifest::{check_outputs, write_output, Manifest};
use crate::Common;

#[derive(Args, Debug)]
pub struct ExportArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Container path; the count dump goes to `<out>.txt`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(a: ExportArgs) -> Result<(), CliError> {
    let mut manifest = Manifest::new("export");
    let mut r = Resolver::load(a.common.config.as_deref())?;
    let force = r.value("force", a.common.force.then_some(true), false)?;
    let weights = r.required::<PathBuf>("weights", a.weights)?;
    let out = r.required::<PathBuf>("out", a.out)?;
    let config_file = r.source().map(|p| p.to_path_buf());
    let snapshot = r.finish()?;

    let suffixed = |s: &str| {
        let mut p = out.as_os_str().to_os_string();
        p.push(s);
        PathBuf::from(p)
    };
    let dump_path = suffixed(".txt");
    let manifest_path = suffixed(".manifest");
    check_outputs(
        &[out.clone(), dump_path.clone(), manifest_path.clone()],
        std::slice::from_ref(&weights),
        force,
    )?;

    let bytes = std::fs::read(&weights).map_err(|e| CliError::data(format!("{}: {e}", weights.display())))?;
    // decoding rejects non-finite values before anything is written
    let set = read_weights(&bytes)?;
    let payload = write_weights(&set)?;

    let calib = param_count(&set.calib);
    let denoise = set.denoise.as_ref().map_or(0, param_count);
    let total = param_count(&set);
    let mut dump = String::new();
    writeln!(dump, "format = TGCN").expect("string write");
    writeln!(dump, "version = {FORMAT_VERSION}").expect("string write");
    writeln!(dump, "calib_params = {calib}").expect("string write");
    writeln!(dump, "denoise_params = {denoise}").expect("string write");
    writeln!(dump, "total_params = {total}").expect("string write");
    writeln!(dump, "header_bytes = {}", HEADER_LEN + FRAMING_LEN).expect("string write");
    writeln!(dump, "payload_bytes = {}", 4 * total).expect("string write");
    writeln!(dump, "file_bytes = {}", payload.len()).expect("string write");

    write_output(&out, &payload)?;
    write_output(&dump_path, &dump)?;
    manifest.config(snapshot, config_file.as_deref());
    manifest.input(&weights);
    manifest.output(&out);
    manifest.output(&dump_path);
    manifest.result("total_params", total);
    manifest.write(&manifest_path)?;
    print!("{dump}");
    Ok(())
}
