//! Command-line flags generated from the config key table.

use clap::{Arg, ArgAction, ArgMatches, Args, Command, FromArgMatches};
use splatlab::train::{KeyKind, CONFIG_KEYS};

/// `--key value` overrides for every config key, with `_` spelled `-`.
#[derive(Debug, Clone, Default)]
pub struct ConfigOverrides {
    values: Vec<(String, String)>,
}

impl ConfigOverrides {
    pub fn pairs(&self) -> impl Iterator<Item = (&str, &str)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}

fn flag(name: &str) -> String {
    name.replace('_', "-")
}

impl Args for ConfigOverrides {
    fn augment_args(cmd: Command) -> Command {
        CONFIG_KEYS.iter().fold(cmd, |cmd, k| {
            let mut arg = Arg::new(k.name)
                .long(flag(k.name))
                .help(k.help)
                .help_heading("Config overrides")
                .action(ArgAction::Set);
            arg = match k.kind {
                KeyKind::Int => arg.value_name("N"),
                KeyKind::Float => arg.value_name("X").allow_negative_numbers(true),
                // A bare `--lfcf` means on.
                KeyKind::Bool => arg.value_name("on|off").num_args(0..=1).default_missing_value("on"),
            };
            cmd.arg(arg)
        })
    }

    fn augment_args_for_update(cmd: Command) -> Command {
        Self::augment_args(cmd)
    }
}

impl FromArgMatches for ConfigOverrides {
    fn from_arg_matches(m: &ArgMatches) -> Result<Self, clap::Error> {
        let mut out = Self::default();
        out.update_from_arg_matches(m)?;
        Ok(out)
    }

    fn update_from_arg_matches(&mut self, m: &ArgMatches) -> Result<(), clap::Error> {
        for k in CONFIG_KEYS {
            if let Some(v) = m.get_one::<String>(k.name) {
                self.values.push((k.name.to_string(), v.clone()));
            }
        }
        Ok(())
    }
}
