//! Field snapshot formats.
//!
//! Binary layout, all little-endian:
//!
//! | offset | type  | content                         |
//! |--------|-------|---------------------------------|
//! | 0      | u32   | dim                             |
//! | 4      | u32   | points per axis                 |
//! | 8      | f64   | half-width `L`                  |
//! | 16     | f64×2 | `re, im` for each point, repeated |
//!
//! Points follow the row-major order of [`Grid`]. The CSV form has one row
//! per point with the coordinates followed by `re,im`.

use std::io::{Read, Write};

use num_complex::Complex64;

use super::{ComplexField, FieldError, Grid};

pub fn write_binary<W: Write>(field: &ComplexField, mut w: W) -> Result<(), FieldError> {
    let g = field.grid();
    w.write_all(&(g.dim as u32).to_le_bytes())?;
    w.write_all(&(g.points_per_axis as u32).to_le_bytes())?;
    w.write_all(&g.half_width.to_le_bytes())?;
    for z in field.values() {
        w.write_all(&z.re.to_le_bytes())?;
        w.write_all(&z.im.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_binary<R: Read>(mut r: R) -> Result<ComplexField, FieldError> {
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b4)?;
    let dim = u32::from_le_bytes(b4) as usize;
    r.read_exact(&mut b4)?;
    let points = u32::from_le_bytes(b4) as usize;
    r.read_exact(&mut b8)?;
    let half_width = f64::from_le_bytes(b8);
    let grid = Grid::new(dim, half_width, points)?;
    let mut values = Vec::with_capacity(grid.len());
    for _ in 0..grid.len() {
        r.read_exact(&mut b8)?;
        let re = f64::from_le_bytes(b8);
        r.read_exact(&mut b8)?;
        let im = f64::from_le_bytes(b8);
        values.push(Complex64::new(re, im));
    }
    let mut tail = [0u8; 1];
    if r.read(&mut tail)? != 0 {
        return Err(FieldError::Format("trailing bytes after field data".into()));
    }
    ComplexField::from_values(grid, values)
}

pub fn write_csv<W: Write>(field: &ComplexField, mut w: W) -> Result<(), FieldError> {
    let g = field.grid();
    const AXES: [&str; 3] = ["x", "y", "z"];
    writeln!(w, "{},re,im", AXES[..g.dim].join(","))?;
    for (i, z) in field.values().iter().enumerate() {
        let x = g.coordinates(i);
        for xi in &x[..g.dim] {
            write!(w, "{xi:.16e},")?;
        }
        writeln!(w, "{:.16e},{:.16e}", z.re, z.im)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn binary_round_trip(dim in 1usize..=3, n in 3usize..6, l in 0.1..20.0f64,
                             vals in proptest::collection::vec((-1e3..1e3f64, -1e3..1e3f64), 216)) {
            let grid = Grid::new(dim, l, n).unwrap();
            let values = vals[..grid.len()].iter().map(|&(a, b)| Complex64::new(a, b)).collect();
            let field = ComplexField::from_values(grid, values).unwrap();
            let mut buf = Vec::new();
            write_binary(&field, &mut buf).unwrap();
            prop_assert_eq!(buf.len(), 16 + 16 * grid.len());
            prop_assert_eq!(read_binary(buf.as_slice()).unwrap(), field);
        }
    }

    #[test]
    fn header_layout() {
        let grid = Grid::new(2, 1.5, 3).unwrap();
        let mut buf = Vec::new();
        write_binary(&ComplexField::zeros(grid), &mut buf).unwrap();
        assert_eq!(&buf[..4], &2u32.to_le_bytes());
        assert_eq!(&buf[4..8], &3u32.to_le_bytes());
        assert_eq!(&buf[8..16], &1.5f64.to_le_bytes());
    }

    #[test]
    fn truncated_and_trailing_input_rejected() {
        let grid = Grid::new(1, 1.0, 4).unwrap();
        let mut buf = Vec::new();
        write_binary(&ComplexField::zeros(grid), &mut buf).unwrap();
        assert!(read_binary(&buf[..buf.len() - 3]).is_err());
        buf.push(0);
        assert!(matches!(read_binary(buf.as_slice()), Err(FieldError::Format(_))));
    }

    #[test]
    fn csv_has_one_row_per_point() {
        let grid = Grid::new(2, 1.0, 3).unwrap();
        let mut buf = Vec::new();
        write_csv(&ComplexField::zeros(grid), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next(), Some("x,y,re,im"));
        assert_eq!(text.lines().count(), 10);
    }
}
