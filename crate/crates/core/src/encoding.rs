//! Discrete cell-based genotype, its architecture graph, and the analytic
//! parameter-count proxy.
//!
//! A genotype is 40 slots: a normal cell followed by a reduction cell, each
//! made of 5 blocks of `(input_a, input_b, op_a, op_b)`. For block `i` of a
//! cell, inputs `0` and `1` are the two cell inputs and `2..=i+1` name the
//! outputs of blocks `0..i` of the same cell.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::EncodingError;

pub const BLOCKS_PER_CELL: usize = 5;
pub const SLOTS_PER_BLOCK: usize = 4;
pub const CELLS: usize = 2;
pub const GENOTYPE_LEN: usize = CELLS * BLOCKS_PER_CELL * SLOTS_PER_BLOCK;
pub const NUM_OPS: usize = 5;
/// Op slots per genotype (two per block).
pub const OP_SLOTS: usize = CELLS * BLOCKS_PER_CELL * 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellKind {
    Normal,
    Reduction,
}

impl CellKind {
    pub const ALL: [CellKind; CELLS] = [CellKind::Normal, CellKind::Reduction];

    pub fn index(self) -> usize {
        match self {
            CellKind::Normal => 0,
            CellKind::Reduction => 1,
        }
    }
}

/// Candidate operator alphabet, in slot-value order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Op {
    SepConv3x3,
    DilConv3x3,
    MaxPool3x3,
    AvgPool3x3,
    Identity,
}

impl Op {
    pub const ALL: [Op; NUM_OPS] = [
        Op::SepConv3x3,
        Op::DilConv3x3,
        Op::MaxPool3x3,
        Op::AvgPool3x3,
        Op::Identity,
    ];

    pub fn from_index(i: u8) -> Option<Op> {
        Op::ALL.get(i as usize).copied()
    }

    pub fn index(self) -> u8 {
        self as u8
    }

    pub fn is_conv(self) -> bool {
        matches!(self, Op::SepConv3x3 | Op::DilConv3x3)
    }
}

/// Role of a slot inside its block.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlotRole {
    InputA,
    InputB,
    OpA,
    OpB,
}

/// Position of a single slot in the 40-slot layout.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SlotPos {
    pub cell: CellKind,
    pub block: usize,
    pub role: SlotRole,
}

impl SlotPos {
    pub fn of(index: usize) -> SlotPos {
        assert!(index < GENOTYPE_LEN, "slot index {index} out of range");
        let cell = CellKind::ALL[index / (BLOCKS_PER_CELL * SLOTS_PER_BLOCK)];
        let within = index % (BLOCKS_PER_CELL * SLOTS_PER_BLOCK);
        let role = match within % SLOTS_PER_BLOCK {
            0 => SlotRole::InputA,
            1 => SlotRole::InputB,
            2 => SlotRole::OpA,
            _ => SlotRole::OpB,
        };
        SlotPos {
            cell,
            block: within / SLOTS_PER_BLOCK,
            role,
        }
    }

    pub fn index(&self) -> usize {
        let role = match self.role {
            SlotRole::InputA => 0,
            SlotRole::InputB => 1,
            SlotRole::OpA => 2,
            SlotRole::OpB => 3,
        };
        self.cell.index() * BLOCKS_PER_CELL * SLOTS_PER_BLOCK + self.block * SLOTS_PER_BLOCK + role
    }

    /// Number of legal values for this slot.
    pub fn cardinality(&self) -> u8 {
        match self.role {
            SlotRole::InputA | SlotRole::InputB => self.block as u8 + 2,
            SlotRole::OpA | SlotRole::OpB => NUM_OPS as u8,
        }
    }
}

/// Legal value count of slot `index`, i.e. values lie in `0..slot_cardinality(index)`.
pub fn slot_cardinality(index: usize) -> u8 {
    SlotPos::of(index).cardinality()
}

/// 40-slot architecture genotype.
///
/// `from_raw` does not validate; use [`Genotype::validate`] or
/// [`Genotype::from_slots`] when the slots come from outside.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Genotype {
    slots: [u8; GENOTYPE_LEN],
}

impl Genotype {
    pub fn from_raw(slots: [u8; GENOTYPE_LEN]) -> Genotype {
        Genotype { slots }
    }

    pub fn from_slots(slots: &[u8]) -> Result<Genotype, EncodingError> {
        let raw: [u8; GENOTYPE_LEN] = slots
            .try_into()
            .map_err(|_| EncodingError::Length(slots.len()))?;
        let g = Genotype { slots: raw };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), EncodingError> {
        for (i, &v) in self.slots.iter().enumerate() {
            let card = slot_cardinality(i);
            if v >= card {
                return Err(EncodingError::SlotOutOfRange {
                    slot: i,
                    value: v,
                    max: card - 1,
                });
            }
        }
        Ok(())
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_ok()
    }

    pub fn slots(&self) -> &[u8; GENOTYPE_LEN] {
        &self.slots
    }

    pub fn slot(&self, index: usize) -> u8 {
        self.slots[index]
    }

    pub fn set_slot(&mut self, index: usize, value: u8) {
        self.slots[index] = value;
    }

    /// The four slots of block `block` (0..10, normal cell first).
    pub fn block(&self, block: usize) -> &[u8] {
        &self.slots[block * SLOTS_PER_BLOCK..(block + 1) * SLOTS_PER_BLOCK]
    }

    pub fn block_mut(&mut self, block: usize) -> &mut [u8] {
        &mut self.slots[block * SLOTS_PER_BLOCK..(block + 1) * SLOTS_PER_BLOCK]
    }

    /// Iterates `(op_slot_index, op)` over the 20 op slots, where
    /// `op_slot_index` is in `0..OP_SLOTS` (cell-major, block, a/b).
    pub fn ops(&self) -> impl Iterator<Item = (usize, Op)> + '_ {
        (0..CELLS * BLOCKS_PER_CELL).flat_map(move |b| {
            (0..2).map(move |k| {
                let v = self.slots[b * SLOTS_PER_BLOCK + 2 + k];
                (b * 2 + k, Op::from_index(v).expect("op slot out of range"))
            })
        })
    }

    pub fn has_conv(&self) -> bool {
        self.ops().any(|(_, op)| op.is_conv())
    }
}

impl fmt::Debug for Genotype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Genotype({self})")
    }
}

/// Compact form `n:abcd_abcd_abcd_abcd_abcd|r:abcd_...`, one digit per slot.
impl fmt::Display for Genotype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for cell in CellKind::ALL {
            if cell == CellKind::Reduction {
                f.write_str("|")?;
            }
            f.write_str(if cell == CellKind::Normal { "n:" } else { "r:" })?;
            for b in 0..BLOCKS_PER_CELL {
                if b > 0 {
                    f.write_str("_")?;
                }
                let start = (cell.index() * BLOCKS_PER_CELL + b) * SLOTS_PER_BLOCK;
                for v in &self.slots[start..start + SLOTS_PER_BLOCK] {
                    write!(f, "{v}")?;
                }
            }
        }
        Ok(())
    }
}

impl FromStr for Genotype {
    type Err = EncodingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || EncodingError::Parse(s.to_string());
        let (n, r) = s.split_once('|').ok_or_else(bad)?;
        let n = n.strip_prefix("n:").ok_or_else(bad)?;
        let r = r.strip_prefix("r:").ok_or_else(bad)?;
        let mut slots = Vec::with_capacity(GENOTYPE_LEN);
        for cell in [n, r] {
            for block in cell.split('_') {
                if block.len() != SLOTS_PER_BLOCK {
                    return Err(bad());
                }
                for c in block.chars() {
                    slots.push(c.to_digit(10).ok_or_else(bad)? as u8);
                }
            }
        }
        Genotype::from_slots(&slots)
    }
}

impl Serialize for Genotype {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.slots.as_slice().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Genotype {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let v: Vec<u8> = Vec::deserialize(deserializer)?;
        Genotype::from_slots(&v).map_err(serde::de::Error::custom)
    }
}

/// Draws every slot uniformly over its legal range.
pub fn random_genotype<R: Rng + ?Sized>(rng: &mut R) -> Genotype {
    let mut slots = [0u8; GENOTYPE_LEN];
    for (i, s) in slots.iter_mut().enumerate() {
        *s = rng.random_range(0..slot_cardinality(i));
    }
    Genotype { slots }
}

/// Source of a block input edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeRef {
    CellInput(u8),
    Block(u8),
}

impl NodeRef {
    fn from_slot(v: u8) -> NodeRef {
        if v < 2 {
            NodeRef::CellInput(v)
        } else {
            NodeRef::Block(v - 2)
        }
    }

    fn to_slot(self) -> u8 {
        match self {
            NodeRef::CellInput(i) => i,
            NodeRef::Block(j) => j + 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockNode {
    pub inputs: [NodeRef; 2],
    pub ops: [Op; 2],
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellGraph {
    pub blocks: Vec<BlockNode>,
    /// Blocks whose outputs are not consumed inside the cell; concatenated
    /// to form the cell output.
    pub outputs: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchitectureGraph {
    pub normal: CellGraph,
    pub reduction: CellGraph,
}

impl ArchitectureGraph {
    pub fn cell(&self, kind: CellKind) -> &CellGraph {
        match kind {
            CellKind::Normal => &self.normal,
            CellKind::Reduction => &self.reduction,
        }
    }
}

pub fn decode(g: &Genotype) -> Result<ArchitectureGraph, EncodingError> {
    g.validate()?;
    let cell = |kind: CellKind| {
        let blocks: Vec<BlockNode> = (0..BLOCKS_PER_CELL)
            .map(|b| {
                let s = g.block(kind.index() * BLOCKS_PER_CELL + b);
                BlockNode {
                    inputs: [NodeRef::from_slot(s[0]), NodeRef::from_slot(s[1])],
                    ops: [
                        Op::from_index(s[2]).expect("validated"),
                        Op::from_index(s[3]).expect("validated"),
                    ],
                }
            })
            .collect();
        let mut consumed = [false; BLOCKS_PER_CELL];
        for node in &blocks {
            for input in node.inputs {
                if let NodeRef::Block(j) = input {
                    consumed[j as usize] = true;
                }
            }
        }
        let outputs = (0..BLOCKS_PER_CELL as u8)
            .filter(|&j| !consumed[j as usize])
            .collect();
        CellGraph { blocks, outputs }
    };
    Ok(ArchitectureGraph {
        normal: cell(CellKind::Normal),
        reduction: cell(CellKind::Reduction),
    })
}

/// Inverse of [`decode`]; fails if the graph violates the block index bounds.
pub fn encode(graph: &ArchitectureGraph) -> Result<Genotype, EncodingError> {
    let mut slots = Vec::with_capacity(GENOTYPE_LEN);
    for kind in CellKind::ALL {
        let cell = graph.cell(kind);
        if cell.blocks.len() != BLOCKS_PER_CELL {
            return Err(EncodingError::Length(
                cell.blocks.len() * SLOTS_PER_BLOCK * CELLS,
            ));
        }
        for node in &cell.blocks {
            slots.extend(node.inputs.iter().map(|r| r.to_slot()));
            slots.extend(node.ops.iter().map(|op| op.index()));
        }
    }
    Genotype::from_slots(&slots)
}

/// Analytic parameter-count proxy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SizeModel {
    pub initial_channels: u64,
    pub cell_repetitions: u64,
}

impl Default for SizeModel {
    fn default() -> Self {
        SizeModel {
            initial_channels: 20,
            cell_repetitions: 1,
        }
    }
}

impl SizeModel {
    pub fn op_params(&self, op: Op) -> u64 {
        let c = self.initial_channels;
        match op {
            Op::SepConv3x3 => 9 * c + c * c,
            Op::DilConv3x3 => 9 * c * c,
            Op::MaxPool3x3 | Op::AvgPool3x3 | Op::Identity => 0,
        }
    }

    /// Multiply-accumulate proxy: convolutions cost their parameter count,
    /// pooling a 3x3 window per channel, identity nothing.
    pub fn op_macs(&self, op: Op) -> u64 {
        match op {
            Op::MaxPool3x3 | Op::AvgPool3x3 => 9 * self.initial_channels,
            _ => self.op_params(op),
        }
    }

    fn weighted_sum(&self, g: &Genotype, cost: impl Fn(Op) -> u64) -> u64 {
        let per_cell = BLOCKS_PER_CELL * 2;
        g.ops()
            .map(|(i, op)| {
                let reps = if i < per_cell {
                    self.cell_repetitions
                } else {
                    1
                };
                reps * cost(op)
            })
            .sum()
    }

    /// Largest parameter count any genotype can reach under this model.
    pub fn max_params(&self) -> u64 {
        let best = Op::ALL
            .iter()
            .map(|&op| self.op_params(op))
            .max()
            .unwrap_or(0);
        (BLOCKS_PER_CELL as u64 * 2) * best * (self.cell_repetitions + 1)
    }
}

pub fn count_params(g: &Genotype, m: &SizeModel) -> u64 {
    m.weighted_sum(g, |op| m.op_params(op))
}

pub fn count_macs(g: &Genotype, m: &SizeModel) -> u64 {
    m.weighted_sum(g, |op| m.op_macs(op))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn uniform(input: u8, op: Op) -> Genotype {
        let mut slots = [0u8; GENOTYPE_LEN];
        for b in 0..CELLS * BLOCKS_PER_CELL {
            slots[b * 4] = input;
            slots[b * 4 + 1] = input;
            slots[b * 4 + 2] = op.index();
            slots[b * 4 + 3] = op.index();
        }
        Genotype::from_raw(slots)
    }

    #[test]
    fn random_genotype_is_deterministic_and_in_bounds() {
        let a = random_genotype(&mut ChaCha8Rng::seed_from_u64(7));
        let b = random_genotype(&mut ChaCha8Rng::seed_from_u64(7));
        assert_eq!(a, b);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10_000 {
            let g = random_genotype(&mut rng);
            for i in 0..GENOTYPE_LEN {
                assert!(g.slot(i) < slot_cardinality(i));
            }
            for cell in 0..CELLS {
                let block0 = g.block(cell * BLOCKS_PER_CELL);
                assert!(block0[0] <= 1 && block0[1] <= 1);
            }
        }
    }

    #[test]
    fn all_identity_graph() {
        let g = uniform(0, Op::Identity);
        let graph = decode(&g).unwrap();
        for kind in CellKind::ALL {
            for node in &graph.cell(kind).blocks {
                assert_eq!(node.inputs, [NodeRef::CellInput(0); 2]);
                assert_eq!(node.ops, [Op::Identity; 2]);
            }
            assert_eq!(graph.cell(kind).outputs, vec![0, 1, 2, 3, 4]);
        }
        assert_eq!(count_params(&g, &SizeModel::default()), 0);
    }

    #[test]
    fn block_input_index_convention() {
        let mut g = uniform(0, Op::Identity);
        // normal cell, block 3, input_a
        g.set_slot(3 * 4, 4);
        let graph = decode(&g).unwrap();
        assert_eq!(graph.normal.blocks[3].inputs[0], NodeRef::Block(2));
        assert_eq!(graph.normal.outputs, vec![0, 1, 3, 4]);
    }

    #[test]
    fn decode_reports_offending_slot() {
        let mut g = uniform(0, Op::Identity);
        g.set_slot(21, 2); // reduction block 0 input_b, max 1
        match decode(&g) {
            Err(EncodingError::SlotOutOfRange { slot, value, max }) => {
                assert_eq!((slot, value, max), (21, 2, 1));
            }
            other => panic!("unexpected {other:?}"),
        }
        g.set_slot(21, 0);
        g.set_slot(7, 5);
        assert!(matches!(
            decode(&g),
            Err(EncodingError::SlotOutOfRange { slot: 7, .. })
        ));
    }

    #[test]
    fn single_sep_conv_costs_580() {
        let mut g = uniform(0, Op::Identity);
        g.set_slot(2, Op::SepConv3x3.index());
        assert_eq!(count_params(&g, &SizeModel::default()), 580);
    }

    #[test]
    fn dilated_scaling_with_channels() {
        let g = uniform(0, Op::DilConv3x3);
        let m20 = SizeModel::default();
        let m40 = SizeModel {
            initial_channels: 40,
            ..m20
        };
        assert_eq!(count_params(&g, &m40), 4 * count_params(&g, &m20));
        assert_eq!(count_params(&g, &m20), m20.max_params());
    }

    #[test]
    fn repetitions_scale_normal_cell_only() {
        let mut g = uniform(0, Op::Identity);
        g.set_slot(2, Op::DilConv3x3.index());
        g.set_slot(22, Op::DilConv3x3.index());
        let m = SizeModel {
            initial_channels: 20,
            cell_repetitions: 3,
        };
        assert_eq!(count_params(&g, &m), 4 * 3600);
    }

    #[test]
    fn compact_string_form() {
        let g = uniform(1, Op::AvgPool3x3);
        let s = g.to_string();
        assert_eq!(s, "n:1133_1133_1133_1133_1133|r:1133_1133_1133_1133_1133");
        assert_eq!(s.parse::<Genotype>().unwrap(), g);
        assert!("n:1133|r:1133".parse::<Genotype>().is_err());
        let json = serde_json::to_string(&g).unwrap();
        assert_eq!(serde_json::from_str::<Genotype>(&json).unwrap(), g);
        assert!(serde_json::from_str::<Genotype>("[0,0]").is_err());
    }

    #[test]
    fn macs_charge_pooling() {
        let g = uniform(0, Op::MaxPool3x3);
        let m = SizeModel::default();
        assert_eq!(count_params(&g, &m), 0);
        assert_eq!(count_macs(&g, &m), 20 * 9 * 20);
    }

    fn arb_genotype() -> impl Strategy<Value = Genotype> {
        any::<u64>().prop_map(|s| random_genotype(&mut ChaCha8Rng::seed_from_u64(s)))
    }

    proptest! {
        #[test]
        fn decode_round_trips(g in arb_genotype()) {
            let graph = decode(&g).unwrap();
            prop_assert_eq!(encode(&graph).unwrap(), g);
            prop_assert_eq!(g.to_string().parse::<Genotype>().unwrap(), g);
        }

        #[test]
        fn params_ignore_inputs_and_vanish_without_conv(g in arb_genotype(), seed in any::<u64>()) {
            let m = SizeModel::default();
            let mut other = random_genotype(&mut ChaCha8Rng::seed_from_u64(seed));
            for (i, _) in g.ops() {
                let idx = (i / 2) * 4 + 2 + i % 2;
                other.set_slot(idx, g.slot(idx));
            }
            prop_assert_eq!(count_params(&g, &m), count_params(&other, &m));
            prop_assert_eq!(count_params(&g, &m) == 0, !g.has_conv());
        }

        #[test]
        fn params_monotone_in_channels(g in arb_genotype(), c in 1u64..64) {
            let a = SizeModel { initial_channels: c, cell_repetitions: 1 };
            let b = SizeModel { initial_channels: c + 1, cell_repetitions: 1 };
            if g.has_conv() {
                prop_assert!(count_params(&g, &a) < count_params(&g, &b));
            }
        }
    }
}
