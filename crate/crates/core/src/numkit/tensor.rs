//! Dense row-major `f64` tensors and the handful of kernels the model needs.

use crate::error::{Error, Result};

/// Row-major dense tensor of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

/// Elementwise nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
    Sigmoid,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Sigmoid => sigmoid(z),
        }
    }

    /// Derivative expressed through the activation's output `y = f(z)`.
    #[inline]
    pub(crate) fn grad_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid => y * (1.0 - y),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "identity" | "linear" => Some(Activation::Identity),
            "relu" => Some(Activation::Relu),
            "tanh" => Some(Activation::Tanh),
            "sigmoid" => Some(Activation::Sigmoid),
            _ => None,
        }
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expected: usize = dims.iter().product();
        if expected != data.len() {
            return Err(Error::shape(
                "Tensor::new",
                format!("dims {:?} need {} values, got {}", dims, expected, data.len()),
            ));
        }
        Ok(Tensor { dims, data })
    }

    pub fn zeros(dims: &[usize]) -> Self {
        let n = dims.iter().product();
        Tensor {
            dims: dims.to_vec(),
            data: vec![0.0; n],
        }
    }

    pub fn filled(dims: &[usize], value: f64) -> Self {
        let n = dims.iter().product();
        Tensor {
            dims: dims.to_vec(),
            data: vec![value; n],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Tensor {
            dims: vec![1],
            data: vec![value],
        }
    }

    pub fn eye(n: usize) -> Self {
        let mut t = Tensor::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    /// Builds a matrix from nested rows. Panics on ragged input; meant for literals.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Tensor {
            dims: vec![r, c],
            data,
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    /// `(rows, cols)` of a rank-2 tensor.
    pub fn shape2(&self) -> Result<(usize, usize)> {
        match self.dims.as_slice() {
            [r, c] => Ok((*r, *c)),
            other => Err(Error::shape("shape2", format!("expected a matrix, got {:?}", other))),
        }
    }

    pub fn get2(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.dims[1] + c]
    }

    pub fn set2(&mut self, r: usize, c: usize, v: f64) {
        let cols = self.dims[1];
        self.data[r * cols + c] = v;
    }

    pub fn reshape(&self, dims: &[usize]) -> Result<Tensor> {
        let n: usize = dims.iter().product();
        if n != self.data.len() {
            return Err(Error::shape(
                "reshape",
                format!("{:?} -> {:?}", self.dims, dims),
            ));
        }
        Ok(Tensor {
            dims: dims.to_vec(),
            data: self.data.clone(),
        })
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            dims: self.dims.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub(crate) fn check_same_dims(&self, other: &Tensor, op: &'static str) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::shape(
                op,
                format!("{:?} vs {:?}", self.dims, other.dims),
            ));
        }
        Ok(())
    }

    pub(crate) fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn transpose(&self) -> Result<Tensor> {
        let (r, c) = self.shape2()?;
        let mut out = Tensor::zeros(&[c, r]);
        for i in 0..r {
            for j in 0..c {
                out.data[j * r + i] = self.data[i * c + j];
            }
        }
        Ok(out)
    }
}

fn ensure_finite(t: Tensor, op: &'static str) -> Result<Tensor> {
    if t.all_finite() {
        Ok(t)
    } else {
        Err(Error::NonFinite(op))
    }
}

/// Dense matrix product `a (n×k) · b (k×m)`.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (n, k) = a.shape2()?;
    let (k2, m) = b.shape2()?;
    if k != k2 {
        return Err(Error::shape(
            "matmul",
            format!("{:?} · {:?}", a.dims, b.dims),
        ));
    }
    let mut out = vec![0.0; n * m];
    for i in 0..n {
        let row = &mut out[i * m..(i + 1) * m];
        for p in 0..k {
            let av = a.data[i * k + p];
            if av == 0.0 {
                continue;
            }
            let brow = &b.data[p * m..(p + 1) * m];
            for (o, bv) in row.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    ensure_finite(Tensor { dims: vec![n, m], data: out }, "matmul")
}

/// `aᵀ · b` without materialising the transpose.
pub(crate) fn matmul_tn(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (k, n) = a.shape2()?;
    let (k2, m) = b.shape2()?;
    if k != k2 {
        return Err(Error::shape("matmul_tn", format!("{:?}ᵀ · {:?}", a.dims, b.dims)));
    }
    let mut out = vec![0.0; n * m];
    for p in 0..k {
        let arow = &a.data[p * n..(p + 1) * n];
        let brow = &b.data[p * m..(p + 1) * m];
        for (i, &av) in arow.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let orow = &mut out[i * m..(i + 1) * m];
            for (o, bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    Ok(Tensor { dims: vec![n, m], data: out })
}

/// `a · bᵀ` without materialising the transpose.
pub(crate) fn matmul_nt(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (n, k) = a.shape2()?;
    let (m, k2) = b.shape2()?;
    if k != k2 {
        return Err(Error::shape("matmul_nt", format!("{:?} · {:?}ᵀ", a.dims, b.dims)));
    }
    let mut out = vec![0.0; n * m];
    for i in 0..n {
        let arow = &a.data[i * k..(i + 1) * k];
        for j in 0..m {
            let brow = &b.data[j * k..(j + 1) * k];
            out[i * m + j] = arow.iter().zip(brow).map(|(x, y)| x * y).sum();
        }
    }
    Ok(Tensor { dims: vec![n, m], data: out })
}

pub fn apply_activation(x: &Tensor, kind: Activation) -> Tensor {
    x.map(|v| kind.apply(v))
}

pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    a.check_same_dims(b, "add")?;
    let data = a.data.iter().zip(&b.data).map(|(x, y)| x + y).collect();
    ensure_finite(Tensor { dims: a.dims.clone(), data }, "add")
}

pub fn hadamard(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    a.check_same_dims(b, "hadamard")?;
    let data = a.data.iter().zip(&b.data).map(|(x, y)| x * y).collect();
    ensure_finite(Tensor { dims: a.dims.clone(), data }, "hadamard")
}

/// Stacks `times` copies of an `r×c` matrix vertically.
pub fn tile_rows(x: &Tensor, times: usize) -> Result<Tensor> {
    let (r, c) = x.shape2()?;
    let mut data = Vec::with_capacity(r * c * times);
    for _ in 0..times {
        data.extend_from_slice(&x.data);
    }
    Ok(Tensor { dims: vec![r * times, c], data })
}

/// Horizontal concatenation of two matrices with equal row counts.
pub fn concat_cols(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (ra, ca) = a.shape2()?;
    let (rb, cb) = b.shape2()?;
    if ra != rb {
        return Err(Error::shape("concat_cols", format!("{:?} | {:?}", a.dims, b.dims)));
    }
    let mut data = Vec::with_capacity(ra * (ca + cb));
    for i in 0..ra {
        data.extend_from_slice(&a.data[i * ca..(i + 1) * ca]);
        data.extend_from_slice(&b.data[i * cb..(i + 1) * cb]);
    }
    Ok(Tensor { dims: vec![ra, ca + cb], data })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_identity() {
        let b = Tensor::from_rows(&[&[5.0], &[6.0]]);
        assert_eq!(matmul(&Tensor::eye(2), &b).unwrap(), b);
    }

    #[test]
    fn matmul_hand_product() {
        let a = Tensor::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let b = Tensor::from_rows(&[&[5.0], &[6.0]]);
        let c = matmul(&a, &b).unwrap();
        assert_eq!(c.data(), &[17.0, 39.0]);
        assert_eq!(c.dims(), &[2, 1]);
    }

    #[test]
    fn matmul_zero_annihilates() {
        let b = Tensor::from_rows(&[&[1.5, -2.0], &[3.0, 4.0]]);
        let c = matmul(&Tensor::zeros(&[3, 2]), &b).unwrap();
        assert!(c.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn matmul_rejects_mismatch() {
        let err = matmul(&Tensor::zeros(&[2, 3]), &Tensor::zeros(&[2, 3])).unwrap_err();
        assert!(matches!(err, Error::Shape { .. }));
    }

    #[test]
    fn transposed_products_agree() {
        let a = Tensor::from_rows(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]]);
        let b = Tensor::from_rows(&[&[1.0, -1.0], &[0.5, 2.0]]);
        let tn = matmul_tn(&a, &b).unwrap();
        assert_eq!(tn, matmul(&a.transpose().unwrap(), &b).unwrap());
        let c = Tensor::from_rows(&[&[1.0, 0.0, 2.0], &[3.0, 1.0, 1.0]]);
        let nt = matmul_nt(&a, &c).unwrap();
        assert_eq!(nt, matmul(&a, &c.transpose().unwrap()).unwrap());
    }

    #[test]
    fn activations_at_reference_points() {
        assert_eq!(Activation::Relu.apply(-1.0), 0.0);
        assert_eq!(Activation::Tanh.apply(0.0), 0.0);
        assert_eq!(Activation::Sigmoid.apply(0.0), 0.5);
        let x = Tensor::from_rows(&[&[-50.0, -1.0, 0.0, 1.0, 50.0]]);
        let t = apply_activation(&x, Activation::Tanh);
        assert!(t.data().iter().all(|&v| (-1.0..=1.0).contains(&v)));
        let s = apply_activation(&x, Activation::Sigmoid);
        assert!(s.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        let r = apply_activation(&x, Activation::Relu);
        assert!(r.data().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn tile_and_concat_shapes() {
        let x = Tensor::from_rows(&[&[1.0, 2.0]]);
        let t = tile_rows(&x, 3).unwrap();
        assert_eq!(t.dims(), &[3, 2]);
        let c = concat_cols(&t, &Tensor::filled(&[3, 1], 9.0)).unwrap();
        assert_eq!(c.data(), &[1.0, 2.0, 9.0, 1.0, 2.0, 9.0, 1.0, 2.0, 9.0]);
    }
}
