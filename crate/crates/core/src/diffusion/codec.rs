use super::Tensor;

/// Image to latent mapping standing in for a learned autoencoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Codec {
    /// Latent is the image.
    #[default]
    Identity,
    /// k x k block averages; decoding repeats each latent value over its block.
    AvgPool(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum CodecError {
    #[error("{height}x{width} is not divisible by pool size {k}")]
    Indivisible { height: usize, width: usize, k: usize },
    #[error("pool size must be at least 1")]
    ZeroPool,
}

impl Codec {
    /// Latent spatial size for an image of the given size.
    pub fn latent_size(&self, height: usize, width: usize) -> Result<(usize, usize), CodecError> {
        match *self {
            Codec::Identity => Ok((height, width)),
            Codec::AvgPool(0) => Err(CodecError::ZeroPool),
            Codec::AvgPool(k) if height % k != 0 || width % k != 0 => {
                Err(CodecError::Indivisible { height, width, k })
            }
            Codec::AvgPool(k) => Ok((height / k, width / k)),
        }
    }

    pub fn encode(&self, image: &Tensor) -> Result<Tensor, CodecError> {
        let (c, h, w) = image.shape();
        let (lh, lw) = self.latent_size(h, w)?;
        Ok(match *self {
            Codec::Identity => image.clone(),
            Codec::AvgPool(k) => {
                let inv = 1.0 / (k * k) as f64;
                Tensor::from_fn(c, lh, lw, |ch, y, x| {
                    let mut s = 0.0;
                    for dy in 0..k {
                        for dx in 0..k {
                            s += image.at(ch, y * k + dy, x * k + dx);
                        }
                    }
                    s * inv
                })
            }
        })
    }

    /// Decodes a latent produced by this codec. Always succeeds for pooling
    /// since every latent size has an image size.
    pub fn decode(&self, latent: &Tensor) -> Tensor {
        match *self {
            Codec::Identity => latent.clone(),
            Codec::AvgPool(k) => {
                let (c, h, w) = latent.shape();
                Tensor::from_fn(c, h * k, w * k, |ch, y, x| latent.at(ch, y / k, x / k))
            }
        }
    }

    /// Transpose of [`Codec::encode`]: maps a latent-space gradient to image space.
    pub fn encode_adjoint(&self, grad: &Tensor) -> Tensor {
        match *self {
            Codec::Identity => grad.clone(),
            Codec::AvgPool(k) => self.decode(grad).scale(1.0 / (k * k) as f64),
        }
    }

    /// Transpose of [`Codec::decode`]: maps an image-space gradient to latent space.
    pub fn decode_adjoint(&self, grad: &Tensor) -> Result<Tensor, CodecError> {
        match *self {
            Codec::Identity => Ok(grad.clone()),
            Codec::AvgPool(k) => Ok(self.encode(grad)?.scale((k * k) as f64)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(c: usize, h: usize, w: usize) -> Tensor {
        Tensor::from_fn(c, h, w, |ch, y, x| (ch * 31 + y * 7 + x) as f64 * 0.37 - 2.0)
    }

    #[test]
    fn identity_roundtrip_is_bitwise() {
        let x = ramp(3, 5, 7);
        assert_eq!(Codec::Identity.decode(&Codec::Identity.encode(&x).unwrap()), x);
    }

    #[test]
    fn pool_of_constant_roundtrips() {
        let x = Tensor::filled(2, 4, 6, 0.3);
        let p = Codec::AvgPool(2);
        assert_eq!(p.decode(&p.encode(&x).unwrap()), x);
    }

    #[test]
    fn pool_of_checkerboard_is_gray() {
        let x = Tensor::from_fn(1, 4, 4, |_, y, x| ((y + x) % 2) as f64);
        let p = Codec::AvgPool(2);
        assert_eq!(p.decode(&p.encode(&x).unwrap()), Tensor::filled(1, 4, 4, 0.5));
    }

    #[test]
    fn indivisible_sizes_are_rejected() {
        let p = Codec::AvgPool(4);
        assert_eq!(p.encode(&ramp(1, 6, 8)), Err(CodecError::Indivisible { height: 6, width: 8, k: 4 }));
        assert_eq!(Codec::AvgPool(0).latent_size(4, 4), Err(CodecError::ZeroPool));
    }

    #[test]
    fn adjoints_satisfy_inner_product_identity() {
        for codec in [Codec::Identity, Codec::AvgPool(2), Codec::AvgPool(3)] {
            let x = ramp(2, 6, 6);
            let (lh, lw) = codec.latent_size(6, 6).unwrap();
            let g = Tensor::from_fn(2, lh, lw, |c, y, x| ((c + 2 * y + 3 * x) % 5) as f64 - 1.5);
            let lhs = codec.encode(&x).unwrap().dot(&g);
            let rhs = x.dot(&codec.encode_adjoint(&g));
            assert!((lhs - rhs).abs() < 1e-12);
            let lhs = codec.decode(&g).dot(&x);
            let rhs = g.dot(&codec.decode_adjoint(&x).unwrap());
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }
}
