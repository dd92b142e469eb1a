use crate::error::{Error, Result};
use crate::fem::Field;
use crate::kkt::layout::{Block, Layout};

/// Primal, adjoint and multiplier unknowns of the optimality system.
///
/// Fields keep every dof, including Dirichlet values; the flat vector view
/// only carries the free ones. `z` and `psi_z` are empty unless the
/// strategy is S1.
#[derive(Debug, Clone, PartialEq)]
pub struct KKTState {
    pub w: Field,
    pub v: Field,
    pub p: Field,
    pub psi_v: Field,
    pub psi_p: Field,
    pub psi_w: Field,
    pub z: Field,
    pub psi_z: Field,
    pub b: Field,
    pub psi_b: Field,
    pub c: Field,
    pub lambda: f64,
    pub mu: [f64; 2],
}

impl KKTState {
    /// Everything zero except the velocity Dirichlet values.
    pub fn initial(layout: &Layout, velocity_bc: &[f64]) -> Self {
        let s = &layout.spaces;
        let mut v = Field::zeros(s.v);
        v.coeffs.copy_from_slice(velocity_bc);
        KKTState {
            w: Field::zeros(s.w),
            v,
            p: Field::zeros(s.p),
            psi_v: Field::zeros(s.v),
            psi_p: Field::zeros(s.p),
            psi_w: Field::zeros(s.w),
            z: Field::zeros(s.z),
            psi_z: Field::zeros(s.z),
            b: Field::zeros(s.b),
            psi_b: Field::zeros(s.b),
            c: Field::zeros(s.c),
            lambda: 0.0,
            mu: [0.0; 2],
        }
    }

    pub fn block(&self, b: Block) -> &[f64] {
        match b {
            Block::W => &self.w.coeffs,
            Block::V => &self.v.coeffs,
            Block::P => &self.p.coeffs,
            Block::PsiV => &self.psi_v.coeffs,
            Block::PsiP => &self.psi_p.coeffs,
            Block::PsiW => &self.psi_w.coeffs,
            Block::Z => &self.z.coeffs,
            Block::PsiZ => &self.psi_z.coeffs,
            Block::B => &self.b.coeffs,
            Block::PsiB => &self.psi_b.coeffs,
            Block::C => &self.c.coeffs,
            Block::Lambda => std::slice::from_ref(&self.lambda),
            Block::Mu => &self.mu,
        }
    }

    pub fn block_mut(&mut self, b: Block) -> &mut [f64] {
        match b {
            Block::W => &mut self.w.coeffs,
            Block::V => &mut self.v.coeffs,
            Block::P => &mut self.p.coeffs,
            Block::PsiV => &mut self.psi_v.coeffs,
            Block::PsiP => &mut self.psi_p.coeffs,
            Block::PsiW => &mut self.psi_w.coeffs,
            Block::Z => &mut self.z.coeffs,
            Block::PsiZ => &mut self.psi_z.coeffs,
            Block::B => &mut self.b.coeffs,
            Block::PsiB => &mut self.psi_b.coeffs,
            Block::C => &mut self.c.coeffs,
            Block::Lambda => std::slice::from_mut(&mut self.lambda),
            Block::Mu => &mut self.mu,
        }
    }

    /// Free dofs in flat order.
    pub fn to_flat(&self, layout: &Layout) -> Vec<f64> {
        let mut out = vec![0.0; layout.len()];
        for block in Block::ALL {
            let bl = layout.block(block);
            let src = self.block(block);
            for (k, &i) in bl.free.iter().enumerate() {
                out[bl.offset + k] = src[i];
            }
        }
        out
    }

    /// Overwrites the free dofs from a flat vector; fixed dofs keep their
    /// values.
    pub fn set_flat(&mut self, layout: &Layout, x: &[f64]) -> Result<()> {
        self.check(layout, x)?;
        for block in Block::ALL {
            let bl = layout.block(block);
            let dst = self.block_mut(block);
            for (k, &i) in bl.free.iter().enumerate() {
                dst[i] = x[bl.offset + k];
            }
        }
        Ok(())
    }

    /// `self += a * dx` on the free dofs.
    pub fn add_flat(&mut self, layout: &Layout, a: f64, dx: &[f64]) -> Result<()> {
        self.check(layout, dx)?;
        for block in Block::ALL {
            let bl = layout.block(block);
            let dst = self.block_mut(block);
            for (k, &i) in bl.free.iter().enumerate() {
                dst[i] += a * dx[bl.offset + k];
            }
        }
        Ok(())
    }

    fn check(&self, layout: &Layout, x: &[f64]) -> Result<()> {
        if x.len() != layout.len() {
            return Err(Error::Dimension(format!(
                "flat vector has length {}, expected {}",
                x.len(),
                layout.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("state update"));
        }
        Ok(())
    }
}
