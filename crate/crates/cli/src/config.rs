//! Flat `key = value` config files. Keys are long flag names without the
//! leading dashes; flags given on the command line win.

use std::fs;

use clap::Command;

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse(text: &str) -> Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(format!("line {}: expected `key = value`, got `{raw}`", i + 1));
        };
        let key = key.trim().trim_start_matches("--");
        let value = value.trim().trim_matches('"');
        if key.is_empty() {
            return Err(format!("line {}: empty key", i + 1));
        }
        out.push((key.replace('_', "-"), value.to_string()));
    }
    Ok(out)
}

fn take_config_path(args: &mut Vec<String>) -> Result<Option<String>, String> {
    let Some(pos) = args.iter().position(|a| a == "--config" || a.starts_with("--config=")) else {
        return Ok(None);
    };
    let flag = args.remove(pos);
    if let Some(path) = flag.strip_prefix("--config=") {
        return Ok(Some(path.to_string()));
    }
    if pos < args.len() {
        Ok(Some(args.remove(pos)))
    } else {
        Err("--config needs a file path".into())
    }
}

/// Splices settings from `--config FILE` into `args` right after the
/// subcommand, skipping keys that are already on the command line.
pub fn apply(mut args: Vec<String>, cli: &Command) -> Result<Vec<String>, String> {
    let Some(path) = take_config_path(&mut args)? else {
        return Ok(args);
    };
    let text = fs::read_to_string(&path).map_err(|e| format!("cannot read config {path}: {e}"))?;
    let entries = parse(&text).map_err(|e| format!("{path}: {e}"))?;

    let Some(sub_pos) = args.iter().skip(1).position(|a| !a.starts_with('-')).map(|p| p + 1) else {
        return Ok(args);
    };
    let Some(sub) = cli.find_subcommand(&args[sub_pos]) else {
        // let clap report the unknown subcommand
        return Ok(args);
    };
    let user = &args[sub_pos + 1..];
    let mut injected = Vec::new();
    for (key, value) in entries {
        let Some(arg) = sub.get_arguments().find(|a| a.get_long() == Some(key.as_str())) else {
            return Err(format!("{path}: `{key}` is not an option of `{}`", sub.get_name()));
        };
        let long = format!("--{key}");
        let given = user.iter().any(|u| {
            *u == long
                || u.starts_with(&format!("{long}="))
                || arg.get_short().is_some_and(|s| *u == format!("-{s}"))
        });
        if given {
            continue;
        }
        if arg.get_action().takes_values() {
            injected.push(format!("{long}={value}"));
        } else {
            match value.as_str() {
                "true" | "yes" | "1" => injected.push(long),
                "false" | "no" | "0" => {}
                other => return Err(format!("{path}: `{key}` expects true or false, got `{other}`")),
            }
        }
    }
    args.splice(sub_pos + 1..sub_pos + 1, injected);
    Ok(args)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_quotes() {
        let got = parse("# rod\nlength = 0.25\n\nyoungs=7e10 # Pa\nformat = \"json\"\nmax_iterations = 50\n").unwrap();
        assert_eq!(
            got,
            vec![
                ("length".to_string(), "0.25".to_string()),
                ("youngs".to_string(), "7e10".to_string()),
                ("format".to_string(), "json".to_string()),
                ("max-iterations".to_string(), "50".to_string()),
            ]
        );
        assert!(parse("length 0.2").is_err());
        assert!(parse(" = 3").is_err());
    }
}
