//! Subnet-Router anycast target generation.
//!
//! Every generator is a lazy iterator. Input prefix lists are collected and
//! normalized up front (hundreds of thousands of entries at most), but the
//! targets themselves are produced on demand, so streams with billions of
//! addresses never have to be held in memory.
//!
//! Overlapping announcements are resolved before generation, which makes the
//! per-prefix target sets disjoint and lets most streams deduplicate without
//! remembering what they already emitted.

mod sample;

use std::collections::HashSet;
use std::fmt;
use std::net::Ipv6Addr;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::prefix::{sra_address, Ipv6Prefix};
use sample::IndexPermutation;

/// Subnet length of the Stage 2 partition.
pub const STAGE2_LEN: u8 = 48;
/// Subnet length of Stage 3, Route(6) and hitlist targets.
pub const SUBNET64_LEN: u8 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    /// Stage 1: the prefix as announced.
    BgpAsAnnounced,
    /// Stage 2: every /48 of the announced space.
    Bgp48,
    /// Stage 3: every /64 of each /48 announcement.
    Bgp64,
    /// Random /64s of Route(6) objects.
    Route6Random64,
    /// /64s cut from hitlist host addresses.
    Hitlist64,
    /// Read back from a plain address list; provenance unknown.
    Listed,
}

impl Stage {
    /// Length of the subnets this stage targets; `None` for Stage 1, where the
    /// announced length is kept.
    pub fn subnet_len(self) -> Option<u8> {
        match self {
            Stage::BgpAsAnnounced | Stage::Listed => None,
            Stage::Bgp48 => Some(STAGE2_LEN),
            Stage::Bgp64 | Stage::Route6Random64 | Stage::Hitlist64 => Some(SUBNET64_LEN),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Stage::BgpAsAnnounced => "bgp_as_announced",
            Stage::Bgp48 => "bgp48",
            Stage::Bgp64 => "bgp64",
            Stage::Route6Random64 => "route6_random64",
            Stage::Hitlist64 => "hitlist64",
            Stage::Listed => "listed",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bgp_as_announced" => Ok(Stage::BgpAsAnnounced),
            "bgp48" => Ok(Stage::Bgp48),
            "bgp64" => Ok(Stage::Bgp64),
            "route6_random64" => Ok(Stage::Route6Random64),
            "hitlist64" => Ok(Stage::Hitlist64),
            "listed" => Ok(Stage::Listed),
            other => Err(format!("unknown stage `{other}`")),
        }
    }
}

/// An SRA address together with where it came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProbeTarget {
    pub address: Ipv6Addr,
    pub origin: Ipv6Prefix,
    pub stage: Stage,
}

impl ProbeTarget {
    /// A target without provenance: the address is its own /128 origin.
    pub fn listed(address: Ipv6Addr) -> Self {
        Self {
            address,
            origin: Ipv6Prefix::truncate(u128::from(address), 128),
            stage: Stage::Listed,
        }
    }

    /// The subnet this target is the SRA address of.
    pub fn subnet(&self) -> Ipv6Prefix {
        let len = self.stage.subnet_len().unwrap_or(self.origin.len());
        Ipv6Prefix::truncate(u128::from(self.address), len)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub route6_samples_per_prefix: u64,
    pub rng_seed: u64,
    pub max_targets: Option<u64>,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            route6_samples_per_prefix: 10_000,
            rng_seed: 0,
            max_targets: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GenerationError {
    #[error("route6_samples_per_prefix must be at least 1")]
    ZeroSamples,
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<(), GenerationError> {
        if self.route6_samples_per_prefix == 0 {
            return Err(GenerationError::ZeroSamples);
        }
        Ok(())
    }

    /// Truncates a stream to `max_targets` when a cap is configured.
    pub fn cap<I: Iterator>(&self, iter: I) -> std::iter::Take<I> {
        let n = self
            .max_targets
            .map(|m| usize::try_from(m).unwrap_or(usize::MAX))
            .unwrap_or(usize::MAX);
        iter.take(n)
    }
}

fn target(addr: u128, origin: Ipv6Prefix, stage: Stage) -> ProbeTarget {
    ProbeTarget {
        address: Ipv6Addr::from(addr),
        origin,
        stage,
    }
}

/// Sorted by network then length; a covering prefix always precedes the
/// prefixes it covers.
fn sorted_unique(prefixes: impl IntoIterator<Item = Ipv6Prefix>) -> Vec<Ipv6Prefix> {
    let mut v: Vec<Ipv6Prefix> = prefixes.into_iter().collect();
    v.sort_unstable();
    v.dedup();
    v
}

/// Stage 1: the SRA address of every announced prefix.
///
/// Announcements that share a network address (a /32 and the first /48 inside
/// it) have the same SRA address; it is emitted once, attributed to the
/// shortest prefix.
pub fn gen_stage1(prefixes: impl IntoIterator<Item = Ipv6Prefix>) -> impl Iterator<Item = ProbeTarget> + Send {
    let mut v = sorted_unique(prefixes);
    v.dedup_by_key(|p| p.bits());
    v.into_iter().map(|p| target(p.bits(), p, Stage::BgpAsAnnounced))
}

/// A block of equally sized subnets attributed to one origin.
#[derive(Debug, Clone, Copy)]
struct SubnetBlock {
    origin: Ipv6Prefix,
    space: Ipv6Prefix,
}

fn enumerate_blocks(blocks: Vec<SubnetBlock>, sub_len: u8, stage: Stage) -> impl Iterator<Item = ProbeTarget> + Send {
    blocks.into_iter().flat_map(move |b| {
        let count = b
            .space
            .subnet_count(sub_len)
            .expect("block is no longer than the subnet length") as u64;
        let shift = 128 - sub_len as u32;
        let base = b.space.bits();
        let origin = b.origin;
        (0..count).map(move |i| target(base | ((i as u128) << shift), origin, stage))
    })
}

/// Stage 2: the SRA address of every /48 inside the announced space.
///
/// A prefix of length `L <= 48` contributes its `2^(48-L)` /48s. A longer
/// prefix contributes its /48 supernet unless that /48 lies inside another
/// announcement of length `<= 48`; such targets record the supernet as their
/// origin. Nested announcements collapse into the outermost one.
pub fn gen_stage2(prefixes: impl IntoIterator<Item = Ipv6Prefix>) -> impl Iterator<Item = ProbeTarget> + Send {
    // (space, from_supernet); announced /48s sort ahead of identical supernets
    let mut spaces: Vec<(Ipv6Prefix, bool)> = prefixes
        .into_iter()
        .map(|p| {
            if p.len() <= STAGE2_LEN {
                (p, false)
            } else {
                (p.supernet(STAGE2_LEN), true)
            }
        })
        .collect();
    spaces.sort_unstable();
    spaces.dedup_by_key(|(p, _)| *p);

    let mut blocks: Vec<SubnetBlock> = Vec::with_capacity(spaces.len());
    for (space, _) in spaces {
        if let Some(root) = blocks.last() {
            if root.space.covers(&space) {
                continue;
            }
        }
        blocks.push(SubnetBlock { origin: space, space });
    }
    enumerate_blocks(blocks, STAGE2_LEN, Stage::Bgp48)
}

/// Stage 3: every /64 SRA address beneath each /48 announcement. Other
/// lengths are ignored.
pub fn gen_stage3(prefixes: impl IntoIterator<Item = Ipv6Prefix>) -> impl Iterator<Item = ProbeTarget> + Send {
    let blocks = sorted_unique(prefixes.into_iter().filter(|p| p.len() == STAGE2_LEN))
        .into_iter()
        .map(|p| SubnetBlock { origin: p, space: p })
        .collect();
    enumerate_blocks(blocks, SUBNET64_LEN, Stage::Bgp64)
}

/// Stages 1-3 over the same announcements with addresses shared between stages
/// emitted once. Each stage keeps its own order; Stage 1 comes first.
pub fn gen_bgp_combined(prefixes: impl IntoIterator<Item = Ipv6Prefix>) -> impl Iterator<Item = ProbeTarget> + Send {
    let prefixes = sorted_unique(prefixes);
    let stage1: Vec<ProbeTarget> = gen_stage1(prefixes.iter().copied()).collect();
    let seen: HashSet<Ipv6Addr> = stage1.iter().map(|t| t.address).collect();
    let seen2 = seen.clone();
    let stage2 = gen_stage2(prefixes.clone()).filter(move |t| !seen.contains(&t.address));
    // the first /64 of a /48 announcement is that /48's SRA, already in Stage 2
    let stage3 =
        gen_stage3(prefixes).filter(move |t| u128::from(t.address) != t.origin.bits() && !seen2.contains(&t.address));
    stage1.into_iter().chain(stage2).chain(stage3)
}

/// Sampling state for one effective prefix.
#[derive(Debug, Clone)]
struct Route6Member {
    origin: Ipv6Prefix,
    perm: IndexPermutation,
    count: u64,
}

impl Route6Member {
    fn new(origin: Ipv6Prefix, samples: u64, seed: u64) -> Self {
        let bits = (SUBNET64_LEN - origin.len()) as u32;
        let space = 1u128 << bits;
        let count = (samples as u128).min(space) as u64;
        Self {
            origin,
            perm: IndexPermutation::new(bits, seed, &origin),
            count,
        }
    }

    fn address(&self, i: u64) -> u128 {
        let index = self.perm.apply(i) as u128;
        self.origin.bits() | (index << (128 - SUBNET64_LEN as u32))
    }
}

/// Lazily samples random /64 SRA addresses for Route(6) prefixes.
pub struct Route6Targets {
    clusters: std::vec::IntoIter<Vec<Ipv6Prefix>>,
    samples: u64,
    seed: u64,
    members: Vec<Route6Member>,
    member: usize,
    next: u64,
    // only populated for clusters of nested prefixes
    seen: Option<HashSet<u64>>,
}

impl Route6Targets {
    fn load_cluster(&mut self) -> bool {
        loop {
            let Some(cluster) = self.clusters.next() else {
                return false;
            };
            self.seen = (cluster.len() > 1).then(HashSet::new);
            self.members = cluster
                .into_iter()
                .map(|p| Route6Member::new(p, self.samples, self.seed))
                .collect();
            self.member = 0;
            self.next = 0;
            if !self.members.is_empty() {
                return true;
            }
        }
    }
}

impl Iterator for Route6Targets {
    type Item = ProbeTarget;

    fn next(&mut self) -> Option<ProbeTarget> {
        loop {
            if self.member >= self.members.len() && !self.load_cluster() {
                return None;
            }
            let m = &self.members[self.member];
            if self.next >= m.count {
                self.member += 1;
                self.next = 0;
                continue;
            }
            let addr = m.address(self.next);
            self.next += 1;
            if let Some(seen) = self.seen.as_mut() {
                if !seen.insert((addr >> 64) as u64) {
                    continue;
                }
            }
            return Some(target(addr, m.origin, Stage::Route6Random64));
        }
    }
}

/// Route(6): up to `route6_samples_per_prefix` distinct random /64 SRA
/// addresses per prefix, drawn without replacement from a seeded permutation.
/// Prefixes longer than /64 contribute their /64 supernet.
///
/// Output is deduplicated; only groups of nested prefixes need a seen-set,
/// and it is dropped once the group is exhausted.
pub fn gen_route6(
    prefixes: impl IntoIterator<Item = Ipv6Prefix>,
    cfg: &GenerationConfig,
) -> Result<Route6Targets, GenerationError> {
    cfg.validate()?;
    let effective = sorted_unique(prefixes.into_iter().map(|p| p.supernet(SUBNET64_LEN)));
    let mut clusters: Vec<Vec<Ipv6Prefix>> = Vec::new();
    for p in effective {
        match clusters.last_mut() {
            Some(c) if c[0].covers(&p) => c.push(p),
            _ => clusters.push(vec![p]),
        }
    }
    Ok(Route6Targets {
        clusters: clusters.into_iter(),
        samples: cfg.route6_samples_per_prefix,
        seed: cfg.rng_seed,
        members: Vec::new(),
        member: 0,
        next: 0,
        seen: None,
    })
}

/// Hitlist: the /64 SRA address of every host address, each distinct /64 once.
pub fn gen_from_hitlist<I>(addresses: I) -> HitlistTargets<I::IntoIter>
where
    I: IntoIterator<Item = Ipv6Addr>,
{
    HitlistTargets {
        inner: addresses.into_iter(),
        seen: HashSet::new(),
    }
}

pub struct HitlistTargets<I> {
    inner: I,
    seen: HashSet<u64>,
}

impl<I: Iterator<Item = Ipv6Addr>> Iterator for HitlistTargets<I> {
    type Item = ProbeTarget;

    fn next(&mut self) -> Option<ProbeTarget> {
        for addr in self.inner.by_ref() {
            let net = (u128::from(addr) >> 64) as u64;
            if self.seen.insert(net) {
                let origin = Ipv6Prefix::truncate(u128::from(addr), SUBNET64_LEN);
                return Some(ProbeTarget {
                    address: sra_address(&origin),
                    origin,
                    stage: Stage::Hitlist64,
                });
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prefix::parse_prefix;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn p(s: &str) -> Ipv6Prefix {
        parse_prefix(s).unwrap()
    }

    fn a(s: &str) -> Ipv6Addr {
        s.parse().unwrap()
    }

    /// Brute force: every /48 covered by some input, for inputs no shorter than /32.
    fn covered_48s(prefixes: &[Ipv6Prefix]) -> BTreeSet<u128> {
        let mut out = BTreeSet::new();
        for q in prefixes {
            let space = if q.len() <= 48 { *q } else { q.supernet(48) };
            let n = space.subnet_count(48).unwrap();
            for i in 0..n {
                out.insert(space.subnet(48, i).bits());
            }
        }
        out
    }

    #[test]
    fn stage1_examples() {
        let t: Vec<_> = gen_stage1([p("2001:db8::/32")]).collect();
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].address, a("2001:db8::"));
        assert_eq!(t[0].stage, Stage::BgpAsAnnounced);
        assert_eq!(gen_stage1(Vec::new()).count(), 0);
        assert_eq!(gen_stage1([p("2001:db8::/32"), p("2001:db8::/32")]).count(), 1);
    }

    #[test]
    fn stage1_shared_network_address_emitted_once() {
        let t: Vec<_> = gen_stage1([p("2001:db8::/48"), p("2001:db8::/32")]).collect();
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].origin, p("2001:db8::/32"));
    }

    #[test]
    fn stage2_slash32_yields_all_48s() {
        let t: Vec<_> = gen_stage2([p("2001:db8::/32")]).collect();
        assert_eq!(t.len(), 65536);
        assert_eq!(t[0].address, a("2001:db8::"));
        assert_eq!(t[0xabcd].address, a("2001:db8:abcd::"));
        assert_eq!(t[65535].address, a("2001:db8:ffff::"));
        assert!(t.iter().all(|t| t.origin == p("2001:db8::/32")));
    }

    #[test]
    fn stage2_single_48() {
        let t: Vec<_> = gen_stage2([p("2001:db8::/48")]).collect();
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].address, a("2001:db8::"));
    }

    #[test]
    fn stage2_more_specific_inside_announcement_adds_nothing() {
        let inputs = [p("2001:db8:1:200::/56"), p("2001:db8::/32")];
        let got: BTreeSet<u128> = gen_stage2(inputs).map(|t| u128::from(t.address)).collect();
        assert_eq!(got.len(), 65536);
        assert_eq!(got, covered_48s(&inputs));
    }

    #[test]
    fn stage2_uncovered_more_specific_uses_supernet() {
        let t: Vec<_> = gen_stage2([p("2001:db8:1:200::/56"), p("2001:db8:1:300::/56")]).collect();
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].address, a("2001:db8:1::"));
        assert_eq!(t[0].origin, p("2001:db8:1::/48"));
    }

    #[test]
    fn stage2_unaligned_lengths() {
        for len in 40..=48u8 {
            let q = Ipv6Prefix::truncate(0x2001_0db8_1234_5678u128 << 64, len);
            let brute = covered_48s(&[q]);
            let got: BTreeSet<u128> = gen_stage2([q]).map(|t| u128::from(t.address)).collect();
            assert_eq!(got, brute, "len={len}");
            assert_eq!(got.len() as u128, 1u128 << (48 - len));
        }
    }

    #[test]
    fn stage3_examples() {
        let t: Vec<_> = gen_stage3([p("2001:db8:1::/48")]).collect();
        assert_eq!(t.len(), 65536);
        assert_eq!(t[0].address, a("2001:db8:1::"));
        assert_eq!(t[65535].address, a("2001:db8:1:ffff::"));
        assert_eq!(gen_stage3([p("2001:db8::/32")]).count(), 0);
        assert_eq!(gen_stage3([p("2001:db8:1::/48"), p("2001:db8:1::/48")]).count(), 65536);
    }

    #[test]
    fn combined_dedups_across_stages() {
        let inputs = vec![p("2001:db8::/46"), p("2001:db8:1::/48"), p("2001:db8:1:200::/56")];
        let per_stage: Vec<u128> = gen_stage1(inputs.clone())
            .chain(gen_stage2(inputs.clone()))
            .chain(gen_stage3(inputs.clone()))
            .map(|t| u128::from(t.address))
            .collect();
        let distinct: BTreeSet<u128> = per_stage.iter().copied().collect();
        let combined: Vec<u128> = gen_bgp_combined(inputs).map(|t| u128::from(t.address)).collect();
        assert_eq!(combined.len(), distinct.len());
        assert_eq!(combined.iter().copied().collect::<BTreeSet<_>>(), distinct);
        assert!(per_stage.len() > combined.len());
    }

    #[test]
    fn route6_examples() {
        let cfg = GenerationConfig {
            rng_seed: 42,
            ..Default::default()
        };
        let q = p("2001:db8:5::/48");
        let t: Vec<_> = gen_route6([q], &cfg).unwrap().collect();
        assert_eq!(t.len(), 10_000);
        let distinct: HashSet<_> = t.iter().map(|t| t.address).collect();
        assert_eq!(distinct.len(), 10_000);
        assert!(t
            .iter()
            .all(|t| q.contains(t.address) && u128::from(t.address) as u64 == 0));

        assert_eq!(gen_route6([p("2001:db8:5:7::/64")], &cfg).unwrap().count(), 1);

        let q60 = p("2001:db8:5:10::/60");
        let got: BTreeSet<u128> = gen_route6([q60], &cfg)
            .unwrap()
            .map(|t| u128::from(t.address))
            .collect();
        let expected: BTreeSet<u128> = (0..16u128).map(|i| q60.subnet(64, i).bits()).collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn route6_longer_than_64_uses_supernet() {
        let cfg = GenerationConfig::default();
        let t: Vec<_> = gen_route6([p("2001:db8::1:0:0/96"), p("2001:db8::2:0:0/96")], &cfg)
            .unwrap()
            .collect();
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].address, a("2001:db8::"));
        assert_eq!(t[0].origin, p("2001:db8::/64"));
    }

    #[test]
    fn route6_nested_prefixes_dedup() {
        let cfg = GenerationConfig {
            route6_samples_per_prefix: 100,
            rng_seed: 9,
            max_targets: None,
        };
        // the /60 is fully enumerated and lies inside the /56, which is too
        let t: Vec<_> = gen_route6([p("2001:db8::/56"), p("2001:db8::/60")], &cfg)
            .unwrap()
            .collect();
        let distinct: HashSet<_> = t.iter().map(|t| t.address).collect();
        assert_eq!(distinct.len(), t.len());
        assert!(t.len() >= 100);
    }

    #[test]
    fn route6_rejects_zero_samples() {
        let cfg = GenerationConfig {
            route6_samples_per_prefix: 0,
            ..Default::default()
        };
        assert!(gen_route6([p("2001:db8::/48")], &cfg).is_err());
    }

    #[test]
    fn cap_limits_output() {
        let cfg = GenerationConfig {
            max_targets: Some(10),
            ..Default::default()
        };
        assert_eq!(cfg.cap(gen_stage2([p("2001:db8::/32")])).count(), 10);
    }

    #[test]
    fn hitlist_examples() {
        let t: Vec<_> = gen_from_hitlist([a("2001:db8:1:2::abcd")]).collect();
        assert_eq!(t[0].address, a("2001:db8:1:2::"));
        assert_eq!(t[0].origin, p("2001:db8:1:2::/64"));
        assert_eq!(
            gen_from_hitlist([a("2001:db8:1:2::1"), a("2001:db8:1:2::2")]).count(),
            1
        );
    }

    #[test]
    fn target_subnet() {
        let t = gen_stage2([p("2001:db8::/47")]).nth(1).unwrap();
        assert_eq!(t.subnet(), p("2001:db8:1::/48"));
        let t = gen_stage1([p("2001:db8::/29")]).next().unwrap();
        assert_eq!(t.subnet(), p("2001:db8::/29"));
    }

    fn small_prefix() -> impl Strategy<Value = Ipv6Prefix> {
        // confined to one /32 so overlaps are common
        (any::<u32>(), 33u8..=60)
            .prop_map(|(low, len)| Ipv6Prefix::truncate((0x2001_0db8u128 << 96) | ((low as u128) << 64), len.max(40)))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn stage2_matches_brute_force(inputs in proptest::collection::vec(small_prefix(), 0..6)) {
            let got: Vec<ProbeTarget> = gen_stage2(inputs.clone()).collect();
            let addrs: BTreeSet<u128> = got.iter().map(|t| u128::from(t.address)).collect();
            prop_assert_eq!(addrs.len(), got.len());
            prop_assert_eq!(addrs, covered_48s(&inputs));
            for t in &got {
                prop_assert!(t.origin.contains(t.address));
                prop_assert_eq!(u128::from(t.address) & ((1u128 << 80) - 1), 0);
            }
        }

        #[test]
        fn route6_deterministic_and_distinct(
            inputs in proptest::collection::vec(small_prefix(), 1..5),
            seed in any::<u64>(),
        ) {
            let cfg = GenerationConfig { route6_samples_per_prefix: 50, rng_seed: seed, max_targets: None };
            let first: Vec<ProbeTarget> = gen_route6(inputs.clone(), &cfg).unwrap().collect();
            let second: Vec<ProbeTarget> = gen_route6(inputs.clone(), &cfg).unwrap().collect();
            prop_assert_eq!(&first, &second);
            let distinct: HashSet<_> = first.iter().map(|t| t.address).collect();
            prop_assert_eq!(distinct.len(), first.len());
            for t in &first {
                prop_assert!(t.origin.contains(t.address));
                prop_assert!(inputs.iter().any(|q| q.contains(t.address)));
                prop_assert_eq!(u128::from(t.address) as u64, 0);
            }
        }

        #[test]
        fn hitlist_cardinality(addrs in proptest::collection::vec(any::<u128>().prop_map(|x| x & !(0xffffu128 << 64)), 0..50)) {
            let inputs: Vec<Ipv6Addr> = addrs.iter().map(|&x| Ipv6Addr::from(x)).collect();
            let distinct: BTreeSet<u128> = addrs.iter().map(|x| x >> 64).collect();
            prop_assert_eq!(gen_from_hitlist(inputs).count(), distinct.len());
        }
    }
}
