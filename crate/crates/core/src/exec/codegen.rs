//! Source generation from per-kind code templates.
//!
//! A dialect is a pair of template files. The program template holds the
//! runtime (arena, state loader, waveform writer) with `${NAME}`
//! placeholders; the kernel template holds one `//@kernel <kind>` section
//! per process kind plus a `//@call` section giving the call-site form.
//! Emission retrieves the sections the schedule needs, writes every
//! offset table as a static array and produces one call site per process.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::Command;

use crate::compiler::{ProcessKind, ScheduleProgram};
use crate::kernels::lu::PIVOT_TOLERANCE;
use crate::kernels::{DIVERGENCE_LIMIT, G_OFF, G_ON};
use crate::waveform::WaveformSet;

use super::{ExecError, ExecutionContext};

/// Registered source dialect.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dialect {
    pub name: &'static str,
    program: &'static str,
    kernels: &'static str,
}

const C99: Dialect = Dialect {
    name: "c99",
    program: include_str!("../../templates/c99/program.c"),
    kernels: include_str!("../../templates/c99/kernels.c"),
};

impl Dialect {
    pub fn lookup(name: &str) -> Result<Self, ExecError> {
        match name {
            "c99" => Ok(C99),
            other => Err(ExecError::UnknownDialect(other.to_string())),
        }
    }

    fn sections(&self) -> (String, BTreeMap<String, String>) {
        let mut call = String::new();
        let mut kernels = BTreeMap::new();
        let mut current: Option<(bool, String)> = None;
        let mut body = String::new();
        let mut flush = |cur: &Option<(bool, String)>, body: &mut String| {
            match cur {
                Some((true, _)) => call = std::mem::take(body),
                Some((false, name)) => {
                    kernels.insert(name.clone(), std::mem::take(body));
                }
                None => body.clear(),
            }
        };
        for line in self.kernels.lines() {
            if line == "//@call" {
                flush(&current, &mut body);
                current = Some((true, String::new()));
            } else if let Some(name) = line.strip_prefix("//@kernel ") {
                flush(&current, &mut body);
                current = Some((false, name.trim().to_string()));
            } else {
                body.push_str(line);
                body.push('\n');
            }
        }
        flush(&current, &mut body);
        (call, kernels)
    }
}

fn fill(template: &str, vars: &BTreeMap<&str, String>) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(i) = rest.find("${") {
        out.push_str(&rest[..i]);
        let end = rest[i..].find('}').map(|e| i + e).expect("unterminated placeholder in template");
        let key = &rest[i + 2..end];
        out.push_str(vars.get(key).unwrap_or_else(|| panic!("template placeholder `{key}` unbound")));
        rest = &rest[end + 1..];
    }
    out.push_str(rest);
    out
}

fn c_f64(x: f64) -> String {
    if x.is_nan() {
        "NAN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "HUGE_VAL".into() } else { "(-HUGE_VAL)".into() }
    } else {
        format!("{x:?}")
    }
}

fn c_string(s: &str) -> String {
    let mut o = String::from("\"");
    for ch in s.chars() {
        match ch {
            '"' => o.push_str("\\\""),
            '\\' => o.push_str("\\\\"),
            '\n' => o.push_str("\\n"),
            c if c.is_ascii_graphic() || c == ' ' => o.push(c),
            c => {
                let mut buf = [0u8; 4];
                for b in c.encode_utf8(&mut buf).bytes() {
                    let _ = write!(o, "\\{b:03o}");
                }
            }
        }
    }
    o.push('"');
    o
}

fn array<T>(out: &mut String, ty: &str, name: &str, xs: &[T], f: impl Fn(&T) -> String) {
    let body = if xs.is_empty() { "0".to_string() } else { xs.iter().map(f).collect::<Vec<_>>().join(", ") };
    let _ = writeln!(out, "static const {ty} {name}[] = {{{body}}};");
}

fn csr(out: &mut String, prefix: &str, rows: &[Vec<(usize, bool)>]) {
    let mut ptr = vec![0];
    let mut slot = Vec::new();
    let mut neg = Vec::new();
    for r in rows {
        for &(s, n) in r {
            slot.push(s);
            neg.push(n as u8);
        }
        ptr.push(slot.len());
    }
    array(out, "int", &format!("{prefix}_PTR"), &ptr, |x| x.to_string());
    array(out, "int", &format!("{prefix}_SLOT"), &slot, |x| x.to_string());
    array(out, "unsigned char", &format!("{prefix}_NEG"), &neg, |x| x.to_string());
}

fn function_name(kind: ProcessKind) -> String {
    format!("k_{}", kind.name().replace('.', "_"))
}

/// Generates a standalone program for the schedule.
///
/// The program reads a state snapshot, runs the requested number of steps
/// and writes the recorded channels in the waveform CSV format.
pub fn emit_source(p: &ScheduleProgram, dialect: &str) -> Result<String, ExecError> {
    let d = Dialect::lookup(dialect)?;
    let (call, kernels) = d.sections();

    let mut tables = String::new();
    let sym = &p.symbolic;
    let _ = writeln!(tables, "#define NNZ_A {}\n#define NNZ_LU {}\n#define NCOMPS {}", p.stamp.len(), sym.nnz(), p.comps.len());
    array(&mut tables, "int", "LU_PERM", &sym.perm, |x| x.to_string());
    array(&mut tables, "int", "LU_ROW_PTR", &sym.row_ptr, |x| x.to_string());
    array(&mut tables, "int", "LU_COLS", &sym.cols, |x| x.to_string());
    array(&mut tables, "int", "LU_DIAG", &sym.diag, |x| x.to_string());
    array(&mut tables, "int", "LU_AMAP", &sym.a_map, |x| x.to_string());
    csr(&mut tables, "STAMP", &p.stamp);
    csr(&mut tables, "RHS", &p.rhs);
    let node = |x: &Option<usize>| x.map_or("-1".to_string(), |v| v.to_string());
    array(&mut tables, "int", "COMP_A", &p.comps, |c| node(&c.a));
    array(&mut tables, "int", "COMP_B", &p.comps, |c| node(&c.b));
    array(&mut tables, "int", "COMP_G", &p.comps, |c| c.g.to_string());
    array(&mut tables, "int", "COMP_H", &p.comps, |c| c.h.to_string());
    array(&mut tables, "int", "COMP_S", &p.comps, |c| c.s.to_string());
    array(&mut tables, "int", "COMP_V", &p.comps, |c| c.v.to_string());
    array(&mut tables, "int", "COMP_I", &p.comps, |c| c.i.to_string());

    let mut used = BTreeMap::new();
    let mut body = String::new();
    for (li, layer) in p.layers.iter().enumerate() {
        let _ = writeln!(body, "    /* layer {li} */");
        for g in layer {
            let fname = function_name(g.kind);
            let template = kernels.get(&g.kind.name()).ok_or_else(|| ExecError::UnknownKind(g.kind.name()))?;
            used.insert((g.kind.id(), g.kind), template);
            for rec in &g.procs {
                let s_name = format!("P{}_S", rec.id);
                let c_name = format!("P{}_C", rec.id);
                array(&mut tables, "int", &s_name, &rec.slots, |x| x.to_string());
                array(&mut tables, "double", &c_name, &rec.consts, |&x| c_f64(x));
                let vars = BTreeMap::from([
                    ("FN", fname.clone()),
                    ("SLOTS", s_name),
                    ("NSLOTS", rec.slots.len().to_string()),
                    ("CONSTS", c_name),
                    ("NCONSTS", (rec.consts.len() / p.width).to_string()),
                ]);
                body.push_str(&fill(&call, &vars));
            }
        }
    }
    let kernel_text: String = used.values().map(|t| t.as_str()).collect::<Vec<_>>().join("\n");

    let names: Vec<String> = p.channels.iter().map(|(n, _)| n.clone()).collect();
    let header = {
        let w = WaveformSet::new(names, p.width);
        let mut h = String::from("time");
        for n in w.column_names() {
            h.push(',');
            h.push_str(&n);
        }
        h
    };
    let vars = BTreeMap::from([
        ("TITLE", format!("generated from schedule `{}`, {} layers, width {}", p.profile, p.layers.len(), p.width)),
        ("WIDTH", p.width.to_string()),
        ("EXTENT", p.extent.to_string()),
        ("DT", c_f64(p.dt)),
        ("NODES", p.nodes.to_string()),
        ("A_BASE", p.a_base.to_string()),
        ("LU_BASE", p.lu_base.to_string()),
        ("COUNTER", p.counter.to_string()),
        ("G_ON", c_f64(G_ON)),
        ("G_OFF", c_f64(G_OFF)),
        ("PIVOT_TOLERANCE", c_f64(PIVOT_TOLERANCE)),
        ("DIVERGENCE_LIMIT", c_f64(DIVERGENCE_LIMIT)),
        ("TABLES", tables),
        ("KERNELS", kernel_text),
        ("STEP_BODY", body),
        ("CHANNEL_HEADER", c_string(&header)),
        (
            "CHANNEL_SLOTS",
            if p.channels.is_empty() {
                "0".into()
            } else {
                p.channels.iter().map(|(_, s)| s.to_string()).collect::<Vec<_>>().join(", ")
            },
        ),
        ("NCHANNELS", p.channels.len().to_string()),
    ]);
    Ok(fill(d.program, &vars))
}

/// Host C compiler binding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Toolchain {
    pub compiler: String,
    pub flags: Vec<String>,
}

impl Default for Toolchain {
    /// `$CC` or `cc`, strict C99 with floating-point contraction disabled.
    fn default() -> Self {
        Toolchain {
            compiler: std::env::var("CC").unwrap_or_else(|_| "cc".into()),
            flags: ["-O2", "-std=c99", "-ffp-contract=off", "-fno-fast-math"].map(String::from).to_vec(),
        }
    }
}

impl Toolchain {
    /// Whether the compiler can be launched.
    pub fn available(&self) -> bool {
        Command::new(&self.compiler).arg("--version").output().is_ok_and(|o| o.status.success())
    }
}

/// Executable built from emitted source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompiledProgram {
    pub path: PathBuf,
}

/// Compiles `source` into `dir`. Compiler diagnostics are passed through
/// verbatim on failure.
pub fn compile_emitted(source: &str, toolchain: &Toolchain, dir: &Path) -> Result<CompiledProgram, ExecError> {
    std::fs::create_dir_all(dir)?;
    let src = dir.join("engine.c");
    let exe = dir.join("engine");
    std::fs::write(&src, source)?;
    let out = Command::new(&toolchain.compiler)
        .args(&toolchain.flags)
        .arg("-o")
        .arg(&exe)
        .arg(&src)
        .arg("-lm")
        .output()
        .map_err(|e| ExecError::ToolchainUnavailable(format!("`{}`: {e}", toolchain.compiler)))?;
    if !out.status.success() {
        let mut diagnostics = String::from_utf8_lossy(&out.stderr).into_owned();
        if diagnostics.trim().is_empty() {
            diagnostics = format!("{} exited with {}", toolchain.compiler, out.status);
        }
        return Err(ExecError::CompilationFailed { diagnostics });
    }
    Ok(CompiledProgram { path: exe })
}

impl CompiledProgram {
    /// Runs from `ctx`'s state for `steps` steps using files in `dir`.
    pub fn run(&self, ctx: &ExecutionContext, steps: usize, dir: &Path) -> Result<WaveformSet, ExecError> {
        let state = dir.join("state.txt");
        let waves = dir.join("waveforms.csv");
        std::fs::write(&state, ctx.snapshot())?;
        let out = Command::new(&self.path)
            .arg("--state")
            .arg(&state)
            .arg("--steps")
            .arg(steps.to_string())
            .arg("--out")
            .arg(&waves)
            .output()?;
        if !out.status.success() {
            return Err(ExecError::ProgramFailed(format!(
                "{}: {}",
                out.status,
                String::from_utf8_lossy(&out.stderr).trim()
            )));
        }
        let text = std::fs::read_to_string(&waves)?;
        let mut w = WaveformSet::from_csv(&text).map_err(|e| ExecError::ProgramFailed(e.to_string()))?;
        if w.channels.is_empty() {
            w.width = ctx.schedule.width;
        }
        Ok(w)
    }
}
