//! Runs construct, solve, verify and figdata from a config text, writing all
//! manifests and CSV files to a temporary directory.

use coagflux::config::RunConfig;
use coagflux::pipeline::cmd_all;

fn main() {
    let mut cfg = RunConfig::default();
    cfg.apply_text("# second exponent regime\ngamma = 0.2\np = 0.1\n").unwrap();
    cfg.out_dir = std::env::temp_dir().join("coagflux-example-pipeline");
    println!("config hash {}", cfg.hash());
    match cmd_all(&cfg) {
        Ok(r) => println!("verified: deviation {:.2e} / {:.2e}, outputs in {}", r.max_rel_dev_log, r.max_rel_dev_x, cfg.out_dir.display()),
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(e.stage.exit_code());
        }
    }
}
