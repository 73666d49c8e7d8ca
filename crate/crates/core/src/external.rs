//! Command-line templates for external tools (encoder, decoder, muxer).

use std::collections::HashMap;
use std::process::Command;

use serde::{Deserialize, Serialize};

/// When set, replaces the program of any template whose program is `ffmpeg`.
pub const FFMPEG_ENV: &str = "PANOSELD_FFMPEG";

pub const DEFAULT_ENCODER: &str =
    "ffmpeg -hide_banner -loglevel error -y -f rawvideo -pix_fmt rgb24 -s {width}x{height} -r {fps} -i - -c:v libx264 -pix_fmt yuv420p {output}";
pub const DEFAULT_DECODER: &str =
    "ffmpeg -hide_banner -loglevel error -i {input} -vf fps={fps},scale={size}:{size} -f rawvideo -pix_fmt rgba -";
pub const DEFAULT_MUXER: &str =
    "ffmpeg -hide_banner -loglevel error -y -i {video} -i {audio} -map 0:v -map 1:a -c:v copy -c:a copy -shortest {output}";

/// A program plus arguments with `{name}` placeholders.
///
/// Arguments are split on whitespace; there is no shell quoting, so a
/// placeholder value containing spaces still ends up as one argument.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "TemplateRepr", into = "Vec<String>")]
pub struct CommandTemplate {
    argv: Vec<String>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum TemplateRepr {
    Line(String),
    Argv(Vec<String>),
}

impl From<TemplateRepr> for CommandTemplate {
    fn from(r: TemplateRepr) -> Self {
        match r {
            TemplateRepr::Line(s) => CommandTemplate::parse(&s),
            TemplateRepr::Argv(argv) => CommandTemplate { argv },
        }
    }
}

impl From<CommandTemplate> for Vec<String> {
    fn from(t: CommandTemplate) -> Vec<String> {
        t.argv
    }
}

impl CommandTemplate {
    pub fn parse(line: &str) -> Self {
        CommandTemplate {
            argv: line.split_whitespace().map(str::to_owned).collect(),
        }
    }

    pub fn from_argv(argv: Vec<String>) -> Self {
        CommandTemplate { argv }
    }

    pub fn is_empty(&self) -> bool {
        self.argv.is_empty()
    }

    pub fn program(&self) -> &str {
        self.argv.first().map(String::as_str).unwrap_or("")
    }

    /// Substituted argument vector.
    pub fn expand(&self, vars: &HashMap<&str, String>) -> Vec<String> {
        self.argv
            .iter()
            .enumerate()
            .map(|(i, arg)| {
                if i == 0 && arg == "ffmpeg" {
                    if let Ok(bin) = std::env::var(FFMPEG_ENV) {
                        return bin;
                    }
                }
                let mut out = arg.clone();
                for (k, v) in vars {
                    out = out.replace(&format!("{{{k}}}"), v);
                }
                out
            })
            .collect()
    }

    pub fn command(&self, vars: &HashMap<&str, String>) -> Option<Command> {
        let argv = self.expand(vars);
        let (program, args) = argv.split_first()?;
        let mut cmd = Command::new(program);
        cmd.args(args);
        Some(cmd)
    }
}
