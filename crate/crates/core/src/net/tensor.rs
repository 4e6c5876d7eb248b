use crate::error::{shape, Result};

use super::real::Real;

/// Dense row-major array of rank 1 to 3. Sequence activations are laid out
/// time-major as `[length, batch, channels]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    pub dims: Vec<usize>,
    pub data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    pub fn zeros(dims: &[usize]) -> Self {
        Self { dims: dims.to_vec(), data: vec![T::zero(); dims.iter().product()] }
    }

    pub fn filled(dims: &[usize], value: T) -> Self {
        Self { dims: dims.to_vec(), data: vec![value; dims.iter().product()] }
    }

    pub fn from_vec(dims: &[usize], data: Vec<T>) -> Result<Self> {
        if dims.is_empty() || dims.len() > 3 {
            return Err(shape(format!("tensor rank must be 1..=3, got {}", dims.len())));
        }
        let n: usize = dims.iter().product();
        if n != data.len() {
            return Err(shape(format!("tensor dims {dims:?} need {n} values, got {}", data.len())));
        }
        Ok(Self { dims: dims.to_vec(), data })
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn cast<U: Real>(&self) -> Tensor<U> {
        Tensor { dims: self.dims.clone(), data: self.data.iter().map(|v| U::of(v.as_f64())).collect() }
    }

    /// `(length, batch, channels)` of a sequence tensor; rank 2 reads as batch 1.
    pub fn seq_dims(&self) -> Result<(usize, usize, usize)> {
        match self.dims[..] {
            [l, d] => Ok((l, 1, d)),
            [l, b, d] => Ok((l, b, d)),
            _ => Err(shape(format!("expected a [length, (batch,) channels] tensor, got {:?}", self.dims))),
        }
    }

    /// Sequence tensor with the same rank convention as `self` and new length/channels.
    pub(crate) fn seq_like(&self, length: usize, channels: usize) -> Self {
        match self.dims.len() {
            2 => Self::zeros(&[length, channels]),
            _ => Self::zeros(&[length, self.dims[1], channels]),
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a.as_f64() - b.as_f64()).abs()).fold(0.0, f64::max)
    }
}

pub fn relu_inplace<T: Real>(x: &mut Tensor<T>) {
    for v in &mut x.data {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
}

pub fn sigmoid<T: Real>(v: T) -> T {
    T::one() / (T::one() + (-v).exp())
}

/// Concatenates two sequence tensors along channels.
pub fn concat_channels<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (la, ba, da) = a.seq_dims()?;
    let (lb, bb, db) = b.seq_dims()?;
    if la != lb || ba != bb {
        return Err(shape(format!("cannot concatenate {:?} with {:?}", a.dims, b.dims)));
    }
    let mut out = a.seq_like(la, da + db);
    for r in 0..la * ba {
        let row = &mut out.data[r * (da + db)..(r + 1) * (da + db)];
        row[..da].copy_from_slice(&a.data[r * da..(r + 1) * da]);
        row[da..].copy_from_slice(&b.data[r * db..(r + 1) * db]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_checks() {
        assert!(Tensor::<f32>::from_vec(&[2, 3], vec![0.0; 6]).is_ok());
        assert!(Tensor::<f32>::from_vec(&[2, 3], vec![0.0; 5]).is_err());
        assert!(Tensor::<f32>::from_vec(&[1, 1, 1, 1], vec![0.0]).is_err());
        assert_eq!(Tensor::<f64>::zeros(&[4, 5]).seq_dims().unwrap(), (4, 1, 5));
    }

    #[test]
    fn concat_interleaves_rows() {
        let a = Tensor::from_vec(&[2, 1, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = Tensor::from_vec(&[2, 1, 1], vec![9.0, 8.0]).unwrap();
        let c = concat_channels(&a, &b).unwrap();
        assert_eq!(c.dims, vec![2, 1, 3]);
        assert_eq!(c.data, vec![1.0, 2.0, 9.0, 3.0, 4.0, 8.0]);
    }

    #[test]
    fn sigmoid_saturates_to_one() {
        assert_eq!(sigmoid(50.0f64), 1.0);
        assert_eq!(sigmoid(50.0f32), 1.0);
        assert!((sigmoid(0.0f64) - 0.5).abs() < 1e-15);
    }
}
