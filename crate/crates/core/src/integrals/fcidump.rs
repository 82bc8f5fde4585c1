//! FCIDUMP reading and writing.
//!
//! The header is a Fortran namelist opened by `&FCI` and closed by `&END` or
//! `/`. Body records are `value i j k l` with 1-based indices in chemist
//! notation: `i j k l > 0` is `(ij|kl)`, `i j 0 0` is `h_ij`, `0 0 0 0` is the
//! core energy. Records of the form `i 0 0 0` (orbital energies) are ignored.
//!
//! A non-standard header key `SPINORB=1` marks files whose orbitals are spin
//! orbitals rather than spatial orbitals. Such files carry integrals with only
//! the 4-fold symmetry `(ij|kl) = (kl|ij) = (ji|lk) = (lk|ji)`.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::{Array2, Array4};

use crate::error::{Error, Result};

/// Two integral values that land on the same tensor element may differ by at
/// most this much.
const DUPLICATE_TOL: f64 = 1e-10;

/// Whether orbital indices label spatial orbitals or spin orbitals.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OrbitalLayout {
    Spatial,
    SpinOrbital,
}

/// One- and two-electron integrals plus core energy, as stored in an FCIDUMP.
#[derive(Clone, Debug)]
pub struct IntegralSet {
    pub n_orbitals: usize,
    pub n_electrons: usize,
    pub ms2: i32,
    pub core_energy: f64,
    /// `h[p][q]`, Hartree.
    pub h: Array2<f64>,
    /// `(pq|rs)` in chemist notation, Hartree.
    pub eri: Array4<f64>,
    /// Per-orbital irrep labels; carried along but never used.
    pub orbsym: Vec<i32>,
    pub layout: OrbitalLayout,
}

impl IntegralSet {
    pub fn zeros(n_orbitals: usize, n_electrons: usize, layout: OrbitalLayout) -> Self {
        let n = n_orbitals;
        IntegralSet {
            n_orbitals,
            n_electrons,
            ms2: 0,
            core_energy: 0.0,
            h: Array2::zeros((n, n)),
            eri: Array4::zeros((n, n, n, n)),
            orbsym: vec![1; n],
            layout,
        }
    }

    /// Largest violation of the permutational symmetries the layout promises.
    pub fn symmetry_error(&self) -> f64 {
        let n = self.n_orbitals;
        let mut err: f64 = 0.0;
        for p in 0..n {
            for q in 0..n {
                err = err.max((self.h[[p, q]] - self.h[[q, p]]).abs());
            }
        }
        for p in 0..n {
            for q in 0..n {
                for r in 0..n {
                    for s in 0..n {
                        let x = self.eri[[p, q, r, s]];
                        for &(a, b, c, d) in &symmetry_images(self.layout, p, q, r, s) {
                            err = err.max((x - self.eri[[a, b, c, d]]).abs());
                        }
                    }
                }
            }
        }
        err
    }
}

/// All index tuples equal to `(pq|rs)` under the layout's symmetry.
fn symmetry_images(
    layout: OrbitalLayout,
    p: usize,
    q: usize,
    r: usize,
    s: usize,
) -> Vec<(usize, usize, usize, usize)> {
    match layout {
        OrbitalLayout::Spatial => vec![
            (p, q, r, s),
            (q, p, r, s),
            (p, q, s, r),
            (q, p, s, r),
            (r, s, p, q),
            (s, r, p, q),
            (r, s, q, p),
            (s, r, q, p),
        ],
        OrbitalLayout::SpinOrbital => vec![(p, q, r, s), (r, s, p, q), (q, p, s, r), (s, r, q, p)],
    }
}

#[derive(Debug, Default)]
struct Header {
    norb: Option<usize>,
    nelec: Option<usize>,
    ms2: Option<i32>,
    orbsym: Vec<i32>,
    spinorb: bool,
}

fn parse_header(text: &str) -> Result<Header> {
    let mut header = Header::default();
    // Split into KEY=values groups; values may span commas and lines.
    let body = text.replace('\n', " ");
    let mut entries: Vec<(String, Vec<String>)> = Vec::new();
    for token in body.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        if let Some((key, value)) = token.split_once('=') {
            entries.push((key.trim().to_ascii_uppercase(), vec![value.trim().to_string()]));
        } else if let Some(last) = entries.last_mut() {
            last.1.push(token.to_string());
        } else {
            return Err(Error::parse(format!("unexpected header token `{token}`")));
        }
    }
    for (key, values) in entries {
        let first = values[0].as_str();
        let int = |v: &str| -> Result<i64> {
            v.trim()
                .parse::<i64>()
                .map_err(|_| Error::parse(format!("header key {key}: `{v}` is not an integer")))
        };
        match key.as_str() {
            "NORB" => {
                let v = int(first)?;
                if v <= 0 {
                    return Err(Error::parse("NORB must be positive"));
                }
                header.norb = Some(v as usize);
            }
            "NELEC" => {
                let v = int(first)?;
                if v < 0 {
                    return Err(Error::parse("NELEC must be non-negative"));
                }
                header.nelec = Some(v as usize);
            }
            "MS2" => header.ms2 = Some(int(first)? as i32),
            "ORBSYM" => {
                header.orbsym = values
                    .iter()
                    .flat_map(|v| v.split_whitespace())
                    .map(|v| int(v).map(|x| x as i32))
                    .collect::<Result<_>>()?
            }
            "SPINORB" => {
                let v = first.trim().to_ascii_uppercase();
                header.spinorb = matches!(v.as_str(), "1" | "T" | ".TRUE." | "TRUE");
            }
            // ISYM, UHF, IUHF, ST and friends carry nothing this reader needs.
            _ => {}
        }
    }
    Ok(header)
}

/// Split the file into header text and body text.
fn split_namelist(text: &str) -> Result<(&str, &str)> {
    let start = text
        .find("&FCI")
        .or_else(|| text.find("&fci"))
        .ok_or_else(|| Error::parse("missing &FCI namelist header"))?;
    let after = &text[start + 4..];
    // The namelist ends at `&END` or at a `/` standing alone.
    let upper = after.to_ascii_uppercase();
    let end_amp = upper.find("&END").map(|i| (i, 4));
    let end_slash = after.find('/').map(|i| (i, 1));
    let (end, len) = match (end_amp, end_slash) {
        (Some(a), Some(b)) => {
            if a.0 < b.0 {
                a
            } else {
                b
            }
        }
        (Some(a), None) => a,
        (None, Some(b)) => b,
        (None, None) => return Err(Error::parse("header is not terminated by &END or /")),
    };
    Ok((&after[..end], &after[end + len..]))
}

fn parse_value(token: &str) -> Result<f64> {
    token
        .replace(['D', 'd'], "e")
        .parse::<f64>()
        .map_err(|_| Error::parse(format!("invalid integral value `{token}`")))
}

/// Set `slot` to `value`, or check agreement if it was set before.
fn assign(target: &mut f64, seen: &mut bool, value: f64, what: impl Fn() -> String) -> Result<()> {
    if *seen {
        if (*target - value).abs() > DUPLICATE_TOL {
            return Err(Error::parse(format!(
                "conflicting duplicate entries for {}: {} vs {}",
                what(),
                *target,
                value
            )));
        }
    } else {
        *target = value;
        *seen = true;
    }
    Ok(())
}

pub fn parse_fcidump_str(text: &str) -> Result<IntegralSet> {
    let (header_text, body) = split_namelist(text)?;
    let header = parse_header(header_text)?;
    let n = header.norb.ok_or_else(|| Error::parse("header is missing NORB"))?;
    let nelec = header.nelec.ok_or_else(|| Error::parse("header is missing NELEC"))?;
    let ms2 = header.ms2.ok_or_else(|| Error::parse("header is missing MS2"))?;
    let layout = if header.spinorb { OrbitalLayout::SpinOrbital } else { OrbitalLayout::Spatial };

    let mut ints = IntegralSet::zeros(n, nelec, layout);
    ints.ms2 = ms2;
    if !header.orbsym.is_empty() {
        if header.orbsym.len() != n {
            return Err(Error::parse(format!(
                "ORBSYM has {} entries for NORB={n}",
                header.orbsym.len()
            )));
        }
        ints.orbsym = header.orbsym;
    }

    let mut seen_h = Array2::from_elem((n, n), false);
    let mut seen_eri = Array4::from_elem((n, n, n, n), false);
    let mut seen_core = false;

    for (lineno, line) in body.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != 5 {
            return Err(Error::parse(format!(
                "body line {}: expected `value i j k l`, got `{line}`",
                lineno + 1
            )));
        }
        let value = parse_value(tokens[0])?;
        let mut idx = [0usize; 4];
        for (slot, tok) in idx.iter_mut().zip(&tokens[1..]) {
            let v: i64 = tok
                .parse()
                .map_err(|_| Error::parse(format!("body line {}: bad index `{tok}`", lineno + 1)))?;
            if v < 0 || v as usize > n {
                return Err(Error::parse(format!(
                    "body line {}: index {v} out of range 0..={n}",
                    lineno + 1
                )));
            }
            *slot = v as usize;
        }
        match idx {
            [0, 0, 0, 0] => {
                let mut core = ints.core_energy;
                assign(&mut core, &mut seen_core, value, || "core energy".into())?;
                ints.core_energy = core;
            }
            [i, 0, 0, 0] if i > 0 => {}
            [i, j, 0, 0] if i > 0 && j > 0 => {
                let (p, q) = (i - 1, j - 1);
                for (a, b) in [(p, q), (q, p)] {
                    assign(&mut ints.h[[a, b]], &mut seen_h[[a, b]], value, || {
                        format!("h({i},{j})")
                    })?;
                }
            }
            [i, j, k, l] if i > 0 && j > 0 && k > 0 && l > 0 => {
                for (a, b, c, d) in symmetry_images(layout, i - 1, j - 1, k - 1, l - 1) {
                    assign(
                        &mut ints.eri[[a, b, c, d]],
                        &mut seen_eri[[a, b, c, d]],
                        value,
                        || format!("({i}{j}|{k}{l})"),
                    )?;
                }
            }
            _ => {
                return Err(Error::parse(format!(
                    "body line {}: index pattern {:?} is not a valid record",
                    lineno + 1,
                    idx
                )))
            }
        }
    }
    Ok(ints)
}

pub fn parse_fcidump(path: impl AsRef<Path>) -> Result<IntegralSet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)
        .map_err(|e| Error::parse(format!("cannot read {}: {e}", path.display())))?;
    parse_fcidump_str(&text)
}

/// Symmetry-unique integral records `(value, i, j, k, l)` with 1-based indices,
/// skipping entries with magnitude at or below `tol`.
pub fn unique_entries(ints: &IntegralSet, tol: f64) -> Vec<(f64, usize, usize, usize, usize)> {
    let n = ints.n_orbitals;
    let mut out = Vec::new();
    match ints.layout {
        OrbitalLayout::Spatial => {
            for i in 0..n {
                for j in 0..=i {
                    let ij = i * (i + 1) / 2 + j;
                    for k in 0..n {
                        for l in 0..=k {
                            let kl = k * (k + 1) / 2 + l;
                            if kl > ij {
                                continue;
                            }
                            let v = ints.eri[[i, j, k, l]];
                            if v.abs() > tol {
                                out.push((v, i + 1, j + 1, k + 1, l + 1));
                            }
                        }
                    }
                }
            }
        }
        OrbitalLayout::SpinOrbital => {
            // Canonical representative: the lexicographically largest image.
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        for l in 0..n {
                            let images = symmetry_images(ints.layout, i, j, k, l);
                            if images.iter().any(|&img| img > (i, j, k, l)) {
                                continue;
                            }
                            let v = ints.eri[[i, j, k, l]];
                            if v.abs() > tol {
                                out.push((v, i + 1, j + 1, k + 1, l + 1));
                            }
                        }
                    }
                }
            }
        }
    }
    for i in 0..n {
        for j in 0..=i {
            let v = ints.h[[i, j]];
            if v.abs() > tol {
                out.push((v, i + 1, j + 1, 0, 0));
            }
        }
    }
    out.push((ints.core_energy, 0, 0, 0, 0));
    out
}

pub fn format_fcidump(ints: &IntegralSet, tol: f64) -> String {
    let mut s = String::new();
    let _ = write!(s, " &FCI NORB={},NELEC={},MS2={},\n  ORBSYM=", ints.n_orbitals, ints.n_electrons, ints.ms2);
    for sym in &ints.orbsym {
        let _ = write!(s, "{sym},");
    }
    s.push_str("\n  ISYM=1,\n");
    if ints.layout == OrbitalLayout::SpinOrbital {
        s.push_str("  SPINORB=1,\n");
    }
    s.push_str(" &END\n");
    for (v, i, j, k, l) in unique_entries(ints, tol) {
        let _ = writeln!(s, "{v:>25e} {i:>4} {j:>4} {k:>4} {l:>4}");
    }
    s
}

pub fn write_fcidump(path: impl AsRef<Path>, ints: &IntegralSet, tol: f64) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(format_fcidump(ints, tol).as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_one_orbital_file() {
        let text = " &FCI NORB=1,NELEC=2,MS2=0,\n &END\n 0.5 1 1 0 0\n -1.0 0 0 0 0\n";
        let ints = parse_fcidump_str(text).unwrap();
        assert_eq!(ints.n_orbitals, 1);
        assert_eq!(ints.h[[0, 0]], 0.5);
        assert_eq!(ints.core_energy, -1.0);
        assert_eq!(ints.eri[[0, 0, 0, 0]], 0.0);
    }

    #[test]
    fn slash_terminator_and_fortran_exponent() {
        let text = "&FCI NORB=2, NELEC=2, MS2=0, ORBSYM=1,1, ISYM=1 /\n 1.5D-01 1 2 1 2\n";
        let ints = parse_fcidump_str(text).unwrap();
        assert_eq!(ints.eri[[1, 0, 0, 1]], 0.15);
        assert_eq!(ints.orbsym, vec![1, 1]);
    }

    #[test]
    fn index_out_of_range_is_rejected() {
        let text = " &FCI NORB=14,NELEC=4,MS2=0,\n &END\n 1.0 15 1 1 1\n";
        assert!(matches!(parse_fcidump_str(text), Err(Error::Parse(_))));
    }

    #[test]
    fn conflicting_duplicates_are_rejected() {
        let text = " &FCI NORB=2,NELEC=2,MS2=0,\n &END\n 0.3 1 2 1 1\n 0.4 2 1 1 1\n";
        assert!(matches!(parse_fcidump_str(text), Err(Error::Parse(_))));
        let agreeing = " &FCI NORB=2,NELEC=2,MS2=0,\n &END\n 0.3 1 2 1 1\n 0.3 2 1 1 1\n";
        assert!(parse_fcidump_str(agreeing).is_ok());
    }

    #[test]
    fn malformed_header_is_rejected() {
        assert!(parse_fcidump_str("NORB=2\n 1.0 1 1 0 0\n").is_err());
        assert!(parse_fcidump_str(" &FCI NELEC=2,MS2=0,\n &END\n").is_err());
        assert!(parse_fcidump_str(" &FCI NORB=x,NELEC=2,MS2=0,\n &END\n").is_err());
        assert!(parse_fcidump_str(" &FCI NORB=2,NELEC=2,MS2=0,\n").is_err());
    }

    #[test]
    fn multiline_orbsym() {
        let text = " &FCI NORB=3,NELEC=2,MS2=0,\n  ORBSYM=1,2,\n 3,\n  ISYM=1,\n &END\n";
        let ints = parse_fcidump_str(text).unwrap();
        assert_eq!(ints.orbsym, vec![1, 2, 3]);
    }
}
