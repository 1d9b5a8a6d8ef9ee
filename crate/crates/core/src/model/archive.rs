//! Model archive: a single text file with a manifest header and documented
//! TSV sections (probability tables, vocabulary reference, and the final
//! assignments). Writing is atomic (temp file + rename) and byte-deterministic
//! for a given model: floats are printed with Rust's shortest round-trip
//! formatting.

use super::{Assignments, Hyperparams, Model, Variant, WordType};
use crate::mat::MatF;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use thiserror::Error;

const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ArchiveError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("archive format error at line {line}: {msg}")]
    Format { line: usize, msg: String },
}

fn fmt_err(line: usize, msg: impl Into<String>) -> ArchiveError {
    ArchiveError::Format {
        line,
        msg: msg.into(),
    }
}

pub fn write_model<P: AsRef<Path>>(model: &Model, path: P) -> Result<(), ArchiveError> {
    let path = path.as_ref();
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name().map(|n| n.to_string_lossy()).unwrap_or_default()
    ));
    {
        let mut w = BufWriter::new(File::create(&tmp)?);
        write_into(model, &mut w)?;
        w.flush()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn write_into<W: Write>(model: &Model, w: &mut W) -> Result<(), ArchiveError> {
    let h = &model.hyper;
    writeln!(w, "#convtm-model\t{}", FORMAT_VERSION)?;
    writeln!(w, "#variant\t{}", h.variant.as_str())?;
    writeln!(w, "#K\t{}", h.topics)?;
    writeln!(w, "#D\t{}", h.discourse)?;
    writeln!(w, "#V\t{}", model.vocab_size)?;
    writeln!(w, "#C\t{}", model.num_trees)?;
    writeln!(w, "#alpha\t{}", h.alpha)?;
    writeln!(w, "#beta\t{}", h.beta)?;
    writeln!(w, "#gamma\t{}", h.gamma)?;
    writeln!(w, "#delta\t{}", h.delta)?;
    writeln!(w, "#iters\t{}", h.iters)?;
    writeln!(w, "#burnin\t{}", h.burnin)?;
    writeln!(w, "#seed\t{}", h.seed)?;
    writeln!(w, "#vocab_hash\t{}", model.vocab_hash)?;

    writeln!(w, "#section\ttree_ids\t{}\t1", model.tree_ids.len())?;
    for id in &model.tree_ids {
        writeln!(w, "{}", id)?;
    }
    writeln!(w, "#section\tvocab\t{}\t1", model.vocab_words.len())?;
    for word in &model.vocab_words {
        writeln!(w, "{}", word)?;
    }

    write_table(w, "phi_T", &model.phi_t)?;
    write_table(w, "phi_D", &model.phi_d)?;
    write_vector(w, "phi_B", &model.phi_b)?;
    write_table(w, "theta", &model.theta)?;
    write_table(w, "pi", &model.pi)?;
    write_table(w, "tau", &model.tau)?;

    let a = &model.assignments;
    let lines = assignment_lines(a);
    writeln!(w, "#section\tassign\t{}\t5", lines.len())?;
    for l in lines {
        writeln!(w, "{}", l)?;
    }
    writeln!(w, "#end")?;
    Ok(())
}

fn write_table<W: Write>(w: &mut W, name: &str, m: &MatF) -> Result<(), ArchiveError> {
    writeln!(w, "#section\t{}\t{}\t{}", name, m.rows(), m.cols())?;
    for r in 0..m.rows() {
        let row: Vec<String> = m.row(r).iter().map(|x| x.to_string()).collect();
        writeln!(w, "{}", row.join("\t"))?;
    }
    Ok(())
}

fn write_vector<W: Write>(w: &mut W, name: &str, v: &[f64]) -> Result<(), ArchiveError> {
    if v.is_empty() {
        writeln!(w, "#section\t{}\t0\t0", name)?;
        return Ok(());
    }
    writeln!(w, "#section\t{}\t1\t{}", name, v.len())?;
    let row: Vec<String> = v.iter().map(|x| x.to_string()).collect();
    writeln!(w, "{}", row.join("\t"))?;
    Ok(())
}

fn assignment_lines(a: &Assignments) -> Vec<String> {
    let num_trees = a.z.len().max(a.zt.len());
    let mut lines = Vec::new();
    for c in 0..num_trees {
        let msgs = if !a.z.is_empty() {
            a.z[c].len()
        } else {
            a.zt[c].len()
        };
        for m in 0..msgs {
            let d = if a.d.is_empty() {
                "-".to_string()
            } else {
                a.d[c][m].to_string()
            };
            let z = if a.z.is_empty() {
                "-".to_string()
            } else {
                a.z[c][m].to_string()
            };
            let x = if a.x.is_empty() || a.x[c][m].is_empty() {
                "-".to_string()
            } else {
                a.x[c][m].iter().map(|t| t.code()).collect()
            };
            let zt = if a.zt.is_empty() || a.zt[c][m].is_empty() {
                "-".to_string()
            } else {
                a.zt[c][m]
                    .iter()
                    .map(|&k| {
                        if k == super::LDA_SKIP {
                            "s".to_string()
                        } else {
                            k.to_string()
                        }
                    })
                    .collect::<Vec<_>>()
                    .join(",")
            };
            lines.push(format!("{}\t{}\t{}\t{}\t{}", c, m, d, z, x) + "\t" + &zt);
        }
    }
    lines
}

struct Lines {
    inner: std::iter::Enumerate<std::io::Lines<BufReader<File>>>,
}

impl Lines {
    fn next_line(&mut self) -> Result<(usize, String), ArchiveError> {
        match self.inner.next() {
            Some((i, Ok(l))) => Ok((i + 1, l)),
            Some((i, Err(e))) => Err(fmt_err(i + 1, e.to_string())),
            None => Err(fmt_err(0, "unexpected end of archive")),
        }
    }
}

pub fn read_model<P: AsRef<Path>>(path: P) -> Result<Model, ArchiveError> {
    let mut lines = Lines {
        inner: BufReader::new(File::open(path)?).lines().enumerate(),
    };

    let (ln, magic) = lines.next_line()?;
    let mut parts = magic.split('\t');
    if parts.next() != Some("#convtm-model") {
        return Err(fmt_err(ln, "not a convtm model archive"));
    }
    let version: u32 = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| fmt_err(ln, "missing format version"))?;
    if version != FORMAT_VERSION {
        return Err(fmt_err(ln, format!("unsupported format version {}", version)));
    }

    // header key/value pairs until the first #section
    let mut header = std::collections::HashMap::new();
    let section_line;
    loop {
        let (ln, l) = lines.next_line()?;
        if l.starts_with("#section") {
            section_line = (ln, l);
            break;
        }
        let mut kv = l.trim_start_matches('#').splitn(2, '\t');
        let k = kv.next().unwrap_or_default().to_string();
        let v = kv.next().ok_or_else(|| fmt_err(ln, "bad header line"))?;
        header.insert(k, v.to_string());
    }
    let get = |k: &str| -> Result<&String, ArchiveError> {
        header.get(k).ok_or_else(|| fmt_err(0, format!("missing header field {}", k)))
    };
    let parse_num = |k: &str| -> Result<f64, ArchiveError> {
        get(k)?.parse().map_err(|_| fmt_err(0, format!("bad numeric header {}", k)))
    };

    let variant = Variant::parse(get("variant")?)
        .ok_or_else(|| fmt_err(0, "unknown variant in header"))?;
    let hyper = Hyperparams {
        topics: parse_num("K")? as usize,
        discourse: parse_num("D")? as usize,
        alpha: parse_num("alpha")?,
        beta: parse_num("beta")?,
        gamma: parse_num("gamma")?,
        delta: parse_num("delta")?,
        variant,
        iters: parse_num("iters")? as usize,
        burnin: parse_num("burnin")? as usize,
        seed: parse_num("seed")? as u64,
    };
    let vocab_size = parse_num("V")? as usize;
    let num_trees = parse_num("C")? as usize;
    let vocab_hash = get("vocab_hash")?.clone();

    let mut tree_ids = Vec::new();
    let mut vocab_words = Vec::new();
    let mut phi_t = MatF::empty();
    let mut phi_d = MatF::empty();
    let mut phi_b = Vec::new();
    let mut theta = MatF::empty();
    let mut pi = MatF::empty();
    let mut tau = MatF::empty();
    let mut assignments = Assignments {
        d: Vec::new(),
        z: Vec::new(),
        x: Vec::new(),
        zt: Vec::new(),
    };

    let mut current = Some(section_line);
    while let Some((ln, l)) = current.take() {
        if l == "#end" {
            break;
        }
        let fields: Vec<&str> = l.split('\t').collect();
        if fields.len() != 4 || fields[0] != "#section" {
            return Err(fmt_err(ln, "expected #section line"));
        }
        let name = fields[1];
        let rows: usize = fields[2].parse().map_err(|_| fmt_err(ln, "bad row count"))?;
        let cols: usize = fields[3].parse().map_err(|_| fmt_err(ln, "bad col count"))?;
        match name {
            "tree_ids" => {
                for _ in 0..rows {
                    tree_ids.push(lines.next_line()?.1);
                }
            }
            "vocab" => {
                for _ in 0..rows {
                    vocab_words.push(lines.next_line()?.1);
                }
            }
            "phi_T" | "phi_D" | "theta" | "pi" | "tau" => {
                let table = read_table(&mut lines, rows, cols)?;
                match name {
                    "phi_T" => phi_t = table,
                    "phi_D" => phi_d = table,
                    "theta" => theta = table,
                    "pi" => pi = table,
                    _ => tau = table,
                }
            }
            "phi_B" => {
                if rows == 1 {
                    let (ln, l) = lines.next_line()?;
                    phi_b = parse_float_row(&l, cols, ln)?;
                }
            }
            "assign" => {
                read_assignments(&mut lines, rows, &mut assignments, variant)?;
            }
            other => return Err(fmt_err(ln, format!("unknown section {}", other))),
        }
        current = Some(lines.next_line()?);
    }

    Ok(Model {
        hyper,
        num_trees,
        vocab_size,
        phi_t,
        phi_d,
        phi_b,
        theta,
        pi,
        tau,
        tree_ids,
        vocab_words,
        vocab_hash,
        assignments,
    })
}

fn parse_float_row(l: &str, cols: usize, ln: usize) -> Result<Vec<f64>, ArchiveError> {
    let row: Result<Vec<f64>, _> = l.split('\t').map(str::parse).collect();
    let row = row.map_err(|_| fmt_err(ln, "bad float"))?;
    if row.len() != cols {
        return Err(fmt_err(ln, "row length mismatch"));
    }
    Ok(row)
}

fn read_table(lines: &mut Lines, rows: usize, cols: usize) -> Result<MatF, ArchiveError> {
    let mut out = MatF::zeros(rows, cols);
    for r in 0..rows {
        let (ln, l) = lines.next_line()?;
        let row = parse_float_row(&l, cols, ln)?;
        out.row_mut(r).copy_from_slice(&row);
    }
    Ok(out)
}

fn read_assignments(
    lines: &mut Lines,
    rows: usize,
    a: &mut Assignments,
    variant: Variant,
) -> Result<(), ArchiveError> {
    for _ in 0..rows {
        let (ln, l) = lines.next_line()?;
        let f: Vec<&str> = l.split('\t').collect();
        if f.len() != 6 {
            return Err(fmt_err(ln, "assignment line must have 6 fields"));
        }
        let c: usize = f[0].parse().map_err(|_| fmt_err(ln, "bad tree index"))?;
        let m: usize = f[1].parse().map_err(|_| fmt_err(ln, "bad message index"))?;
        let ensure = |vecs: &mut Vec<Vec<usize>>| {
            while vecs.len() <= c {
                vecs.push(Vec::new());
            }
        };
        if f[2] != "-" {
            ensure(&mut a.d);
            let d: usize = f[2].parse().map_err(|_| fmt_err(ln, "bad d"))?;
            debug_assert_eq!(a.d[c].len(), m);
            a.d[c].push(d);
        }
        if f[3] != "-" {
            ensure(&mut a.z);
            let z: usize = f[3].parse().map_err(|_| fmt_err(ln, "bad z"))?;
            a.z[c].push(z);
        }
        if variant != Variant::Lda {
            while a.x.len() <= c {
                a.x.push(Vec::new());
            }
            let xs = if f[4] == "-" {
                Vec::new()
            } else {
                f[4].chars()
                    .map(|ch| WordType::from_code(ch).ok_or_else(|| fmt_err(ln, "bad word type")))
                    .collect::<Result<Vec<_>, _>>()?
            };
            a.x[c].push(xs);
        } else {
            while a.zt.len() <= c {
                a.zt.push(Vec::new());
            }
            let zs = if f[5] == "-" {
                Vec::new()
            } else {
                f[5].split(',')
                    .map(|s| {
                        if s == "s" {
                            Ok(super::LDA_SKIP)
                        } else {
                            s.parse().map_err(|_| fmt_err(ln, "bad token topic"))
                        }
                    })
                    .collect::<Result<Vec<_>, _>>()?
            };
            a.zt[c].push(zs);
        }
    }
    Ok(())
}
