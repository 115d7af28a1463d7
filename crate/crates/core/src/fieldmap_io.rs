//! Text exchange format for field maps.
//!
//! ```text
//! # ringqed field map v1
//! # provenance: SYNTHETIC | INGESTED
//! # units: r_m=m phi_rad=rad z_m=m field=V/m per unit dipole (arbitrary normalization)
//! # axes: nr=<n> nphi=<n> nz=<n>
//! # source_position: r_m=<x> phi_rad=<x> z_m=<x>          (optional)
//! # source_dipole: <re>,<im>;<re>,<im>;<re>,<im>          (optional, r;phi;z)
//! r_m,phi_rad,z_m,re_Er,im_Er,re_Ephi,im_Ephi,re_Ez,im_Ez
//! <one row per grid node>
//! ```
//!
//! Header lines start with `#` and are `key: value`; unknown keys are
//! ignored. Rows may come in any order; the axes are the sorted distinct
//! coordinate values and every node must appear exactly once. The writer
//! emits shortest round-trip floats, r-major, then z, then phi.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{FieldMap, FieldVector, GridAxes, Provenance, SourceInfo, ZERO_FIELD};
use crate::model::{CylindricalPoint, DipoleVector};

pub const MAGIC: &str = "ringqed field map v1";
pub const COLUMNS: &str = "r_m,phi_rad,z_m,re_Er,im_Er,re_Ephi,im_Ephi,re_Ez,im_Ez";

pub fn write_field_map<W: Write>(map: &FieldMap, mut w: W) -> Result<()> {
    let axes = map.axes();
    writeln!(w, "# {MAGIC}")?;
    writeln!(w, "# provenance: {}", map.provenance().as_str())?;
    writeln!(
        w,
        "# units: r_m=m phi_rad=rad z_m=m field=V/m per unit dipole (arbitrary normalization)"
    )?;
    writeln!(
        w,
        "# axes: nr={} nphi={} nz={}",
        axes.r().len(),
        axes.phi().len(),
        axes.z().len()
    )?;
    if let Some(src) = map.source() {
        let p = src.position;
        writeln!(
            w,
            "# source_position: r_m={:e} phi_rad={:e} z_m={:e}",
            p.r, p.phi, p.z
        )?;
        let d = src.dipole.components();
        writeln!(
            w,
            "# source_dipole: {:e},{:e};{:e},{:e};{:e},{:e}",
            d[0].re, d[0].im, d[1].re, d[1].im, d[2].re, d[2].im
        )?;
    }
    writeln!(w, "{COLUMNS}")?;
    for (ir, &r) in axes.r().iter().enumerate() {
        for (iz, &z) in axes.z().iter().enumerate() {
            for (iphi, &phi) in axes.phi().iter().enumerate() {
                let v = map.at(ir, iz, iphi);
                writeln!(
                    w,
                    "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                    r, phi, z, v[0].re, v[0].im, v[1].re, v[1].im, v[2].re, v[2].im
                )?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn save_field_map(map: &FieldMap, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_field_map(map, std::io::BufWriter::new(file))
}

pub fn load_field_map(path: &Path) -> Result<FieldMap> {
    read_field_map(std::fs::File::open(path)?)
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|e| Error::Parse {
        line,
        msg: format!("bad number {s:?}: {e}"),
    })
}

fn parse_kv(value: &str, line: usize) -> Result<HashMap<String, f64>> {
    value
        .split_whitespace()
        .map(|tok| {
            let (k, v) = tok.split_once('=').ok_or_else(|| Error::Parse {
                line,
                msg: format!("expected key=value, got {tok:?}"),
            })?;
            Ok((k.to_string(), parse_f64(v, line)?))
        })
        .collect()
}

fn parse_dipole(value: &str, line: usize) -> Result<DipoleVector> {
    let parts: Vec<&str> = value.split(';').collect();
    if parts.len() != 3 {
        return Err(Error::Parse {
            line,
            msg: "source_dipole needs three re,im pairs".into(),
        });
    }
    let mut comps = [Complex64::new(0.0, 0.0); 3];
    for (c, part) in comps.iter_mut().zip(parts) {
        let (re, im) = part.split_once(',').ok_or_else(|| Error::Parse {
            line,
            msg: format!("bad complex {part:?}"),
        })?;
        *c = Complex64::new(parse_f64(re, line)?, parse_f64(im, line)?);
    }
    DipoleVector::new(comps)
}

fn get(kv: &HashMap<String, f64>, key: &str, line: usize) -> Result<f64> {
    kv.get(key).copied().ok_or_else(|| Error::Parse {
        line,
        msg: format!("missing {key}"),
    })
}

fn sorted_distinct(mut xs: Vec<f64>) -> Vec<f64> {
    xs.sort_by(|a, b| a.total_cmp(b));
    xs.dedup();
    xs
}

fn position_of(axis: &[f64], x: f64) -> usize {
    axis.binary_search_by(|a| a.total_cmp(&x))
        .expect("value drawn from this axis")
}

pub fn read_field_map<R: Read>(reader: R) -> Result<FieldMap> {
    let reader = BufReader::new(reader);
    let mut provenance = Provenance::Ingested;
    let mut counts: Option<(usize, usize, usize)> = None;
    let mut position: Option<CylindricalPoint> = None;
    let mut dipole: Option<DipoleVector> = None;
    let mut saw_columns = false;
    let mut rows: Vec<([f64; 3], FieldVector, usize)> = Vec::new();

    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(header) = trimmed.strip_prefix('#') {
            let Some((key, value)) = header.split_once(':') else {
                continue;
            };
            let value = value.trim();
            match key.trim() {
                "provenance" => {
                    provenance = match value {
                        "SYNTHETIC" => Provenance::Synthetic,
                        "INGESTED" => Provenance::Ingested,
                        other => {
                            return Err(Error::Parse {
                                line: lineno,
                                msg: format!("unknown provenance {other:?}"),
                            })
                        }
                    }
                }
                "axes" => {
                    let kv = parse_kv(value, lineno)?;
                    counts = Some((
                        get(&kv, "nr", lineno)? as usize,
                        get(&kv, "nphi", lineno)? as usize,
                        get(&kv, "nz", lineno)? as usize,
                    ));
                }
                "source_position" => {
                    let kv = parse_kv(value, lineno)?;
                    position = Some(CylindricalPoint::new(
                        get(&kv, "r_m", lineno)?,
                        get(&kv, "phi_rad", lineno)?,
                        get(&kv, "z_m", lineno)?,
                    ));
                }
                "source_dipole" => dipole = Some(parse_dipole(value, lineno)?),
                _ => {}
            }
            continue;
        }
        if !saw_columns {
            if trimmed.replace(' ', "") != COLUMNS {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("expected column header {COLUMNS:?}"),
                });
            }
            saw_columns = true;
            continue;
        }
        let cells: Vec<&str> = trimmed.split(',').collect();
        if cells.len() != 9 {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected 9 columns, found {}", cells.len()),
            });
        }
        let mut nums = [0.0; 9];
        for (n, cell) in nums.iter_mut().zip(&cells) {
            *n = parse_f64(cell, lineno)?;
        }
        rows.push((
            [nums[0], nums[1], nums[2]],
            [
                Complex64::new(nums[3], nums[4]),
                Complex64::new(nums[5], nums[6]),
                Complex64::new(nums[7], nums[8]),
            ],
            lineno,
        ));
    }
    if !saw_columns {
        return Err(Error::Parse {
            line: 0,
            msg: "missing column header".into(),
        });
    }

    let r_axis = sorted_distinct(rows.iter().map(|r| r.0[0]).collect());
    let phi_axis = sorted_distinct(rows.iter().map(|r| r.0[1]).collect());
    let z_axis = sorted_distinct(rows.iter().map(|r| r.0[2]).collect());
    if let Some((nr, nphi, nz)) = counts {
        if (nr, nphi, nz) != (r_axis.len(), phi_axis.len(), z_axis.len()) {
            return Err(Error::Parse {
                line: 0,
                msg: format!(
                    "axes header says {nr}x{nphi}x{nz}, rows give {}x{}x{}",
                    r_axis.len(),
                    phi_axis.len(),
                    z_axis.len()
                ),
            });
        }
    }
    let axes = GridAxes::new(r_axis, phi_axis, z_axis)?;
    if rows.len() != axes.len() {
        return Err(Error::Parse {
            line: 0,
            msg: format!("{} rows for a grid of {} nodes", rows.len(), axes.len()),
        });
    }
    let mut values = vec![ZERO_FIELD; axes.len()];
    let mut filled = vec![false; axes.len()];
    for (coords, v, lineno) in rows {
        let k = axes.index(
            position_of(axes.r(), coords[0]),
            position_of(axes.z(), coords[2]),
            position_of(axes.phi(), coords[1]),
        );
        if filled[k] {
            return Err(Error::Parse {
                line: lineno,
                msg: "duplicate grid node".into(),
            });
        }
        filled[k] = true;
        values[k] = v;
    }
    let source = match (dipole, position) {
        (Some(dipole), Some(position)) => Some(SourceInfo { dipole, position }),
        (None, None) => None,
        _ => {
            return Err(Error::Parse {
                line: 0,
                msg: "source_position and source_dipole must appear together".into(),
            })
        }
    };
    FieldMap::new(axes, values, source, provenance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::TWO_PI;

    fn sample_map() -> FieldMap {
        let axes = GridAxes::uniform((1.4e-6, 1.5e-6, 3), 8, (-5e-8, 5e-8, 2)).unwrap();
        FieldMap::from_fn(
            axes,
            Some(SourceInfo {
                dipole: DipoleVector::circular(1.0, true).unwrap(),
                position: CylindricalPoint::new(1.45e-6, 0.0, 0.0),
            }),
            Provenance::Synthetic,
            |r, phi, z| {
                [
                    Complex64::from_polar(r * 1e6, 3.0 * phi),
                    Complex64::new(z * 1e7, -0.1 / 3.0),
                    Complex64::new(1e-300, std::f64::consts::PI),
                ]
            },
        )
        .unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let map = sample_map();
        let mut buf = Vec::new();
        write_field_map(&map, &mut buf).unwrap();
        let back = read_field_map(buf.as_slice()).unwrap();
        assert_eq!(back.axes(), map.axes());
        assert_eq!(back.values(), map.values());
        assert_eq!(back.source(), map.source());
        assert_eq!(back.provenance(), Provenance::Synthetic);
    }

    #[test]
    fn rows_in_any_order() {
        let text = format!(
            "{COLUMNS}\n\
             1.0e-6,3.0,0.0,2,0,0,0,0,0\n\
             1.0e-6,0.0,0.0,1,0,0,0,0,0\n"
        );
        let map = read_field_map(text.as_bytes()).unwrap();
        assert_eq!(map.provenance(), Provenance::Ingested);
        assert_eq!(map.axes().phi(), &[0.0, 3.0]);
        assert_eq!(map.at(0, 0, 1)[0].re, 2.0);
        assert!(map.axes().phi().iter().all(|&p| p < TWO_PI));
    }

    #[test]
    fn missing_node_is_an_error() {
        let text = format!(
            "{COLUMNS}\n\
             1.0e-6,0.0,0.0,1,0,0,0,0,0\n\
             2.0e-6,1.0,0.0,1,0,0,0,0,0\n"
        );
        assert!(matches!(read_field_map(text.as_bytes()), Err(Error::Parse { .. })));
    }

    #[test]
    fn nan_in_file_is_rejected() {
        let text = format!("{COLUMNS}\n1.0e-6,0.0,0.0,NaN,0,0,0,0,0\n");
        let err = read_field_map(text.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("finite values"), "{err}");
    }

    #[test]
    fn bad_header_row() {
        let text = "r,phi,z\n1,2,3\n";
        assert!(read_field_map(text.as_bytes()).is_err());
    }
}
