//! TOML configuration. Each table mirrors one subcommand's flags (same
//! names, kebab-case); top-level `seed` and `jobs` apply to every command.
//! Precedence: command-line flag, then the subcommand table, then the
//! top-level key, then the built-in default. Relative paths in the file are
//! resolved against the file's directory.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::args::{CompositeArgs, EvaluateArgs, FuseArgs, MaskpropArgs, MaskrefineArgs, PlanArgs, PoolArgs};
use crate::error::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub plan: PlanArgs,
    pub composite: CompositeArgs,
    pub maskprop: MaskpropArgs,
    pub maskrefine: MaskrefineArgs,
    pub evaluate: EvaluateArgs,
    pub fuse: FuseArgs,
    pub pool: PoolArgs,
    #[serde(skip)]
    pub path: Option<PathBuf>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Config, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| detkit::Error::io(path, e))?;
        let mut cfg: Config =
            toml::from_str(&text).map_err(|e| detkit::Error::format(path, e.to_string().trim_end().to_owned()))?;
        let base = path.parent().unwrap_or(Path::new("")).to_owned();
        cfg.plan.rebase(&base);
        cfg.composite.rebase(&base);
        cfg.maskprop.rebase(&base);
        cfg.maskrefine.rebase(&base);
        cfg.evaluate.rebase(&base);
        cfg.fuse.rebase(&base);
        cfg.pool.rebase(&base);
        cfg.path = Some(path.to_owned());
        Ok(cfg)
    }
}

/// Flag values layered over config values.
pub trait Layered: Sized {
    /// `self` wins wherever it has a value.
    fn over(self, lower: Self) -> Self;
    fn rebase(&mut self, base: &Path);
}

fn rebase_path(p: &mut Option<PathBuf>, base: &Path) {
    if let Some(path) = p {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
}

macro_rules! layered {
    ($ty:ty { paths: [$($p:ident),*], values: [$($v:ident),*] }) => {
        impl Layered for $ty {
            fn over(self, lower: Self) -> Self {
                Self {
                    $($p: self.$p.or(lower.$p),)*
                    $($v: self.$v.or(lower.$v),)*
                }
            }
            fn rebase(&mut self, base: &Path) {
                $(rebase_path(&mut self.$p, base);)*
            }
        }
    };
}

layered!(PlanArgs { paths: [manifest, out], values: [strategy, n, fraction, k, sequences, classes, seed] });
layered!(CompositeArgs {
    paths: [sources, masks, backgrounds, out],
    values: [mode, sigma, scale_min, scale_max, seed]
});
layered!(MaskpropArgs { paths: [prev_mask, out], values: [prev_box, cur_box] });
layered!(MaskrefineArgs { paths: [edges, out], values: [bbox, window, offset] });
layered!(EvaluateArgs { paths: [gt, det, out, curves], values: [iou] });
layered!(FuseArgs {
    paths: [det, manifest, out],
    values: [assoc_iou, max_age, max_trackers, decay, model]
});

impl Layered for PoolArgs {
    fn over(self, lower: Self) -> Self {
        PoolArgs {
            dets: if self.dets.is_empty() { lower.dets } else { self.dets },
            nms_iou: self.nms_iou.or(lower.nms_iou),
            out: self.out.or(lower.out),
        }
    }

    fn rebase(&mut self, base: &Path) {
        for d in &mut self.dets {
            if d.is_relative() {
                *d = base.join(&*d);
            }
        }
        rebase_path(&mut self.out, base);
    }
}

/// Value of a setting that has no default.
pub fn required<T>(v: Option<T>, flag: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::Usage(format!("missing --{flag} (give the flag or set it in the config file)")))
}
