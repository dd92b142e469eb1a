use crate::deform::{Strategy, CLAMPED};
use crate::fem::FESpace;
use crate::mesh::{BoundaryTag, TriMesh};

/// Unknown blocks in the order they appear in the flat vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Block {
    W,
    V,
    P,
    PsiV,
    PsiP,
    PsiW,
    /// Harmonic extension (S1 only).
    Z,
    PsiZ,
    B,
    PsiB,
    C,
    Lambda,
    Mu,
}

impl Block {
    pub const ALL: [Block; 13] = [
        Block::W,
        Block::V,
        Block::P,
        Block::PsiV,
        Block::PsiP,
        Block::PsiW,
        Block::Z,
        Block::PsiZ,
        Block::B,
        Block::PsiB,
        Block::C,
        Block::Lambda,
        Block::Mu,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Block::W => "w",
            Block::V => "v",
            Block::P => "p",
            Block::PsiV => "psi_v",
            Block::PsiP => "psi_p",
            Block::PsiW => "psi_w",
            Block::Z => "z",
            Block::PsiZ => "psi_z",
            Block::B => "b",
            Block::PsiB => "psi_b",
            Block::C => "c",
            Block::Lambda => "lambda",
            Block::Mu => "mu",
        }
    }
}

pub(crate) const NONE: usize = usize::MAX;

#[derive(Debug, Clone)]
pub struct BlockLayout {
    /// First flat index of the block.
    pub offset: usize,
    /// Number of dofs including fixed ones.
    pub full: usize,
    /// Flat index of each dof, `usize::MAX` when fixed.
    pub map: Vec<usize>,
    /// Full indices of the free dofs, in flat order.
    pub free: Vec<usize>,
}

impl BlockLayout {
    fn new(offset: usize, fixed: &[bool]) -> Self {
        let mut map = vec![NONE; fixed.len()];
        let mut free = Vec::new();
        for (i, &f) in fixed.iter().enumerate() {
            if !f {
                map[i] = offset + free.len();
                free.push(i);
            }
        }
        BlockLayout {
            offset,
            full: fixed.len(),
            map,
            free,
        }
    }

    pub fn len(&self) -> usize {
        self.free.len()
    }

    pub fn is_empty(&self) -> bool {
        self.free.is_empty()
    }
}

/// Spaces of every block and the free-dof numbering of the flat vector.
#[derive(Debug, Clone)]
pub struct Layout {
    pub strategy: Strategy,
    pub spaces: Spaces,
    /// Velocity dofs on Γ_in ∪ Γ_ns ∪ Γ_d.
    pub velocity_fixed: Vec<bool>,
    blocks: Vec<BlockLayout>,
    n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spaces {
    pub w: FESpace,
    pub v: FESpace,
    pub p: FESpace,
    pub z: FESpace,
    pub b: FESpace,
    pub c: FESpace,
}

impl Spaces {
    pub fn new(mesh: &TriMesh, strategy: Strategy) -> Self {
        let bdim = if strategy == Strategy::S3 { 2 } else { 1 };
        Spaces {
            w: FESpace::volume_p1_vector(mesh),
            v: FESpace::volume_p2_vector(mesh),
            p: FESpace::volume_p1_scalar(mesh),
            // Zero-dof placeholder outside S1.
            z: if strategy == Strategy::S1 {
                FESpace::volume_p1_scalar(mesh)
            } else {
                FESpace::curve(0, 1, 1)
            },
            b: FESpace::design(mesh, 1, bdim),
            c: FESpace::design(mesh, 1, 1),
        }
    }
}

impl Layout {
    pub fn new(mesh: &TriMesh, strategy: Strategy) -> Self {
        let spaces = Spaces::new(mesh, strategy);
        let velocity_fixed = spaces.v.dof_mask(&spaces.v.boundary_nodes(
            mesh,
            &[
                BoundaryTag::GammaIn,
                BoundaryTag::GammaNs,
                BoundaryTag::GammaD,
            ],
        ));
        let w_fixed = spaces.w.dof_mask(&spaces.w.boundary_nodes(mesh, &CLAMPED));
        let z_fixed = if strategy == Strategy::S1 {
            spaces.z.dof_mask(&spaces.z.boundary_nodes(mesh, &CLAMPED))
        } else {
            Vec::new()
        };
        let mut blocks = Vec::with_capacity(Block::ALL.len());
        let mut offset = 0;
        for block in Block::ALL {
            let fixed = match block {
                Block::W | Block::PsiW => w_fixed.clone(),
                Block::V | Block::PsiV => velocity_fixed.clone(),
                Block::P | Block::PsiP => vec![false; spaces.p.n_dofs()],
                Block::Z | Block::PsiZ => z_fixed.clone(),
                Block::B | Block::PsiB => vec![false; spaces.b.n_dofs()],
                Block::C => vec![false; spaces.c.n_dofs()],
                Block::Lambda => vec![false],
                Block::Mu => vec![false; 2],
            };
            let bl = BlockLayout::new(offset, &fixed);
            offset += bl.len();
            blocks.push(bl);
        }
        Layout {
            strategy,
            spaces,
            velocity_fixed,
            blocks,
            n: offset,
        }
    }

    pub fn block(&self, b: Block) -> &BlockLayout {
        &self.blocks[b.index()]
    }

    /// Length of the flat vector.
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Flat index of dof `i` of block `b`, if free.
    pub fn flat(&self, b: Block, i: usize) -> Option<usize> {
        match self.blocks[b.index()].map[i] {
            NONE => None,
            k => Some(k),
        }
    }

    /// Block and dof owning flat index `k`.
    pub fn locate(&self, k: usize) -> (Block, usize) {
        for block in Block::ALL {
            let bl = self.block(block);
            if k >= bl.offset && k < bl.offset + bl.len() {
                return (block, bl.free[k - bl.offset]);
            }
        }
        panic!("flat index {k} out of range");
    }

    /// Restricts per-block full vectors to the flat vector.
    pub fn gather(&self, full: &[Vec<f64>]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for block in Block::ALL {
            let bl = self.block(block);
            for (k, &i) in bl.free.iter().enumerate() {
                out[bl.offset + k] = full[block.index()][i];
            }
        }
        out
    }
}
