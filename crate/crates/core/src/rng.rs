//! 64-bit linear congruential generator with fixed constants, so random
//! words are reproducible bit for bit.

const MUL: u64 = 6364136223846793005;
const INC: u64 = 1442695040888963407;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lcg64 {
    state: u64,
}

impl Lcg64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    /// Advances the state and returns its high 32 bits.
    pub fn next_u32(&mut self) -> u32 {
        self.state = self.state.wrapping_mul(MUL).wrapping_add(INC);
        (self.state >> 32) as u32
    }

    /// Uniform index in `0..n` by multiply-shift. `n` must be positive.
    pub fn index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.next_u32() as u64 * n as u64) >> 32) as usize
    }
}
