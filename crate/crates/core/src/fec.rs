//! Generic binary LDPC codes: alist parsing, systematic encoding via GF(2)
//! elimination, and flooding min-sum (max-product) decoding with
//! per-iteration soft outputs.

use crate::grid::SoftBits;
use crate::seeds;
use crate::{Error, LLR_CLIP, Result, logistic};
use rand::seq::SliceRandom;

/// Sparse parity-check matrix given by its check→variable adjacency.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParityCheck {
    n: usize,
    m: usize,
    /// Per check, sorted variable indices.
    rows: Vec<Vec<usize>>,
    /// Per variable, sorted check indices.
    cols: Vec<Vec<usize>>,
}

impl ParityCheck {
    /// Builds the matrix from check→variable adjacency, validating that no
    /// row or column is empty, indices are in range and unique, and m < n.
    pub fn new(m: usize, n: usize, rows: Vec<Vec<usize>>) -> Result<Self> {
        if m >= n {
            return Err(Error::InvalidParameter(format!(
                "{m} checks for {n} variables leaves no information bits"
            )));
        }
        if rows.len() != m {
            return Err(Error::ShapeMismatch(format!(
                "expected {m} rows, got {}",
                rows.len()
            )));
        }
        let mut cols: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut rows = rows;
        for (ci, row) in rows.iter_mut().enumerate() {
            if row.is_empty() {
                return Err(Error::InvalidParameter(format!("check {ci} has no variables")));
            }
            row.sort_unstable();
            if row.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidParameter(format!(
                    "check {ci} lists a variable twice"
                )));
            }
            for &v in row.iter() {
                if v >= n {
                    return Err(Error::InvalidParameter(format!(
                        "check {ci} references variable {v} >= {n}"
                    )));
                }
                cols[v].push(ci);
            }
        }
        if let Some(empty) = cols.iter().position(|c| c.is_empty()) {
            return Err(Error::InvalidParameter(format!(
                "variable {empty} appears in no check"
            )));
        }
        Ok(ParityCheck { n, m, rows, cols })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.rows
    }

    pub fn cols(&self) -> &[Vec<usize>] {
        &self.cols
    }

    /// True when `word` satisfies every parity check.
    pub fn is_codeword(&self, word: &[u8]) -> bool {
        word.len() == self.n
            && self
                .rows
                .iter()
                .all(|row| row.iter().map(|&v| word[v] as u32).sum::<u32>() % 2 == 0)
    }
}

/// Parses the standard alist text format: `n m`, max column/row degrees,
/// per-column and per-row degree lists, then 1-indexed adjacency lists
/// (entries may be 0-padded up to the max degree).
pub fn load_alist(text: &str) -> Result<ParityCheck> {
    struct Lines<'a> {
        inner: std::iter::Enumerate<std::str::Lines<'a>>,
    }
    impl Lines<'_> {
        fn next_numbers(&mut self, what: &str) -> Result<(usize, Vec<usize>)> {
            for (idx, line) in self.inner.by_ref() {
                if line.trim().is_empty() {
                    continue;
                }
                let nums: std::result::Result<Vec<usize>, _> =
                    line.split_whitespace().map(str::parse).collect();
                return match nums {
                    Ok(v) => Ok((idx + 1, v)),
                    Err(e) => Err(Error::AlistParse {
                        line: idx + 1,
                        msg: format!("expected {what}: {e}"),
                    }),
                };
            }
            Err(Error::AlistParse { line: 0, msg: format!("unexpected end of file, expected {what}") })
        }
    }
    let mut lines = Lines { inner: text.lines().enumerate() };

    let (lno, dims) = lines.next_numbers("matrix dimensions `n m`")?;
    if dims.len() != 2 {
        return Err(Error::AlistParse { line: lno, msg: "expected exactly two dimensions".into() });
    }
    let (n, m) = (dims[0], dims[1]);
    let (lno, maxdeg) = lines.next_numbers("max degrees")?;
    if maxdeg.len() != 2 {
        return Err(Error::AlistParse { line: lno, msg: "expected two max degrees".into() });
    }
    let (lno, col_deg) = lines.next_numbers("column degrees")?;
    if col_deg.len() != n {
        return Err(Error::AlistParse {
            line: lno,
            msg: format!("expected {n} column degrees, got {}", col_deg.len()),
        });
    }
    let (lno, row_deg) = lines.next_numbers("row degrees")?;
    if row_deg.len() != m {
        return Err(Error::AlistParse {
            line: lno,
            msg: format!("expected {m} row degrees, got {}", row_deg.len()),
        });
    }

    let read_adjacency = |lines: &mut Lines,
                          count: usize,
                          degrees: &[usize],
                          limit: usize,
                          what: &str|
     -> Result<Vec<Vec<usize>>> {
        let mut out = Vec::with_capacity(count);
        for (i, &degree) in degrees.iter().enumerate().take(count) {
            let (lno, mut entries) = lines.next_numbers(what)?;
            // strip 0 padding
            entries.retain(|&e| e != 0);
            if entries.len() != degree {
                return Err(Error::AlistParse {
                    line: lno,
                    msg: format!(
                        "{what} {i} lists {} entries but its degree is {degree}",
                        entries.len()
                    ),
                });
            }
            for &e in &entries {
                if e > limit {
                    return Err(Error::AlistParse {
                        line: lno,
                        msg: format!("{what} {i} references index {e} > {limit}"),
                    });
                }
            }
            out.push(entries.iter().map(|&e| e - 1).collect());
        }
        Ok(out)
    };

    let col_adj = read_adjacency(&mut lines, n, &col_deg, m, "column")?;
    let row_adj = read_adjacency(&mut lines, m, &row_deg, n, "row")?;

    let h = ParityCheck::new(m, n, row_adj).map_err(|e| Error::AlistParse {
        line: 0,
        msg: format!("inconsistent adjacency: {e}"),
    })?;
    // cross-check row and column lists against each other
    for (v, adj) in col_adj.iter().enumerate() {
        let mut want = adj.clone();
        want.sort_unstable();
        if h.cols[v] != want {
            return Err(Error::AlistParse {
                line: 0,
                msg: format!("column {v} adjacency disagrees with the row lists"),
            });
        }
    }
    Ok(h)
}

/// Serializes a parity-check matrix to alist text (unpadded adjacency lines).
pub fn to_alist(h: &ParityCheck) -> String {
    let join = |v: &[usize], offset: usize| {
        v.iter().map(|x| (x + offset).to_string()).collect::<Vec<_>>().join(" ")
    };
    let max_col = h.cols.iter().map(Vec::len).max().unwrap_or(0);
    let max_row = h.rows.iter().map(Vec::len).max().unwrap_or(0);
    let mut out = String::new();
    out.push_str(&format!("{} {}\n", h.n, h.m));
    out.push_str(&format!("{max_col} {max_row}\n"));
    out.push_str(&join(&h.cols.iter().map(Vec::len).collect::<Vec<_>>(), 0));
    out.push('\n');
    out.push_str(&join(&h.rows.iter().map(Vec::len).collect::<Vec<_>>(), 0));
    out.push('\n');
    for col in &h.cols {
        out.push_str(&join(col, 1));
        out.push('\n');
    }
    for row in &h.rows {
        out.push_str(&join(row, 1));
        out.push('\n');
    }
    out
}

/// A systematized code: encoder data derived from a full-row-rank parity
/// check by GF(2) elimination.
#[derive(Debug, Clone)]
pub struct CodeSpec {
    h: ParityCheck,
    /// Codeword positions carrying the K = n − m information bits.
    info_positions: Vec<usize>,
    /// Codeword positions computed by the encoder, one per check row.
    parity_positions: Vec<usize>,
    /// Bit matrix (m × K, packed u64 words): parity i = Σ_j rows[i][j]·u[j].
    parity_rows: Vec<Vec<u64>>,
}

impl CodeSpec {
    pub fn h(&self) -> &ParityCheck {
        &self.h
    }

    pub fn n(&self) -> usize {
        self.h.n
    }

    /// Number of information bits.
    pub fn k(&self) -> usize {
        self.h.n - self.h.m
    }

    pub fn rate(&self) -> f64 {
        self.k() as f64 / self.n() as f64
    }

    pub fn info_positions(&self) -> &[usize] {
        &self.info_positions
    }

    /// Encodes K information bits into an n-bit codeword with `H·c = 0`.
    pub fn encode(&self, info: &[u8]) -> Result<Vec<u8>> {
        let k = self.k();
        if info.len() != k {
            return Err(Error::ShapeMismatch(format!(
                "expected {k} information bits, got {}",
                info.len()
            )));
        }
        let mut c = vec![0u8; self.n()];
        for (j, &pos) in self.info_positions.iter().enumerate() {
            c[pos] = info[j];
        }
        for (i, &pos) in self.parity_positions.iter().enumerate() {
            let mut acc = 0u64;
            for (w, word) in self.parity_rows[i].iter().enumerate() {
                let mut bits = *word;
                while bits != 0 {
                    let b = bits.trailing_zeros() as usize;
                    acc ^= info[w * 64 + b] as u64;
                    bits &= bits - 1;
                }
            }
            c[pos] = acc as u8;
        }
        Ok(c)
    }
}

/// Derives encoder data from `h` by Gauss-Jordan elimination over GF(2).
///
/// Fails with the achieved rank if `h` does not have full row rank.
pub fn systematize(h: &ParityCheck) -> Result<CodeSpec> {
    let (m, n) = (h.m, h.n);
    let words = n.div_ceil(64);
    // dense row bitmaps
    let mut dense: Vec<Vec<u64>> = vec![vec![0u64; words]; m];
    for (ci, row) in h.rows.iter().enumerate() {
        for &v in row {
            dense[ci][v / 64] |= 1u64 << (v % 64);
        }
    }
    let bit = |row: &[u64], j: usize| (row[j / 64] >> (j % 64)) & 1 == 1;

    let mut pivot_cols = Vec::with_capacity(m);
    let mut rank = 0usize;
    for col in 0..n {
        if rank == m {
            break;
        }
        let Some(pivot) = (rank..m).find(|&r| bit(&dense[r], col)) else {
            continue;
        };
        dense.swap(rank, pivot);
        let pivot_row = dense[rank].clone();
        for (r, row) in dense.iter_mut().enumerate() {
            if r != rank && bit(row, col) {
                for w in 0..words {
                    row[w] ^= pivot_row[w];
                }
            }
        }
        pivot_cols.push(col);
        rank += 1;
    }
    if rank < m {
        return Err(Error::RankDeficient { rank, rows: m });
    }

    let pivot_set: std::collections::BTreeSet<usize> = pivot_cols.iter().copied().collect();
    let info_positions: Vec<usize> = (0..n).filter(|j| !pivot_set.contains(j)).collect();
    let k = n - m;
    let info_words = k.div_ceil(64);
    let parity_rows: Vec<Vec<u64>> = dense
        .iter()
        .map(|row| {
            let mut packed = vec![0u64; info_words];
            for (j, &pos) in info_positions.iter().enumerate() {
                if bit(row, pos) {
                    packed[j / 64] |= 1u64 << (j % 64);
                }
            }
            packed
        })
        .collect();

    Ok(CodeSpec {
        h: h.clone(),
        info_positions,
        parity_positions: pivot_cols,
        parity_rows,
    })
}

/// Soft information-bit estimates after each decoding iteration.
#[derive(Debug, Clone)]
pub struct IterationOutputs {
    /// One probability-domain estimate of the K information bits per
    /// iteration.
    pub iterations: Vec<SoftBits>,
}

impl IterationOutputs {
    pub fn n_iters(&self) -> usize {
        self.iterations.len()
    }

    /// Soft output of the last iteration.
    pub fn last(&self) -> &SoftBits {
        self.iterations.last().expect("n_iters >= 1")
    }
}

/// Flooding min-sum (max-product) decoding for a fixed number of iterations.
///
/// `channel_llrs` follow the convention that positive values mean bit = 0 is
/// more likely. After every iteration the information-bit posteriors are
/// clipped at ±[`LLR_CLIP`] and converted to probabilities of bit = 1, so the
/// output shape is deterministic and every probability lies strictly inside
/// (0, 1).
pub fn decode_bp(channel_llrs: &[f64], code: &CodeSpec, n_iters: usize) -> Result<IterationOutputs> {
    let h = &code.h;
    if channel_llrs.len() != h.n {
        return Err(Error::ShapeMismatch(format!(
            "expected {} LLRs, got {}",
            h.n,
            channel_llrs.len()
        )));
    }
    if n_iters == 0 {
        return Err(Error::InvalidParameter("at least one decoding iteration".into()));
    }

    // per-edge messages, addressed as (check, position within its row)
    let mut v2c: Vec<Vec<f64>> =
        h.rows.iter().map(|row| row.iter().map(|&v| channel_llrs[v]).collect()).collect();
    let mut c2v: Vec<Vec<f64>> = h.rows.iter().map(|row| vec![0.0; row.len()]).collect();
    // per-variable list of (check, position) edges
    let mut var_edges: Vec<Vec<(usize, usize)>> = vec![Vec::new(); h.n];
    for (ci, row) in h.rows.iter().enumerate() {
        for (pos, &v) in row.iter().enumerate() {
            var_edges[v].push((ci, pos));
        }
    }

    let mut iterations = Vec::with_capacity(n_iters);
    let mut posterior = vec![0.0f64; h.n];
    for _ in 0..n_iters {
        // check update: sign product times minimum magnitude of the others
        for (ci, row) in h.rows.iter().enumerate() {
            let msgs = &v2c[ci];
            let mut sign = 1.0f64;
            let (mut min1, mut min2, mut argmin) = (f64::INFINITY, f64::INFINITY, 0usize);
            for (pos, &msg) in msgs.iter().enumerate() {
                if msg < 0.0 {
                    sign = -sign;
                }
                let mag = msg.abs();
                if mag < min1 {
                    min2 = min1;
                    min1 = mag;
                    argmin = pos;
                } else if mag < min2 {
                    min2 = mag;
                }
            }
            for pos in 0..row.len() {
                let mag = if pos == argmin { min2 } else { min1 };
                let msg_sign = if msgs[pos] < 0.0 { -1.0 } else { 1.0 };
                c2v[ci][pos] = sign * msg_sign * mag;
            }
        }
        // variable update and posterior
        for v in 0..h.n {
            let total: f64 = var_edges[v].iter().map(|&(ci, pos)| c2v[ci][pos]).sum();
            posterior[v] = channel_llrs[v] + total;
            for &(ci, pos) in &var_edges[v] {
                v2c[ci][pos] = posterior[v] - c2v[ci][pos];
            }
        }
        let values: Vec<f64> = code
            .info_positions
            .iter()
            .map(|&v| logistic(-posterior[v].clamp(-LLR_CLIP, LLR_CLIP)))
            .collect();
        iterations.push(SoftBits { values });
    }
    Ok(IterationOutputs { iterations })
}

/// Converts probability-domain soft bits to decoder LLRs:
/// `LLR = log((1−p)/p)`, clamped to ±[`LLR_CLIP`].
pub fn probabilities_to_llrs(soft: &SoftBits) -> Vec<f64> {
    soft.values
        .iter()
        .map(|&p| {
            let p = p.clamp(1e-300, 1.0 - 1e-16);
            ((1.0 - p) / p).ln().clamp(-LLR_CLIP, LLR_CLIP)
        })
        .collect()
}

/// Generates a (col_weight, row_weight)-regular LDPC parity check with no
/// 4-cycles, suitable as a test fixture. Deterministic in `seed`; fails if no
/// valid full-rank matrix is found within the attempt budget.
pub fn generate_regular_ldpc(
    n: usize,
    col_weight: usize,
    row_weight: usize,
    seed: u64,
) -> Result<ParityCheck> {
    if n == 0 || col_weight == 0 || row_weight <= col_weight {
        return Err(Error::InvalidParameter("degenerate LDPC parameters".into()));
    }
    if !(n * col_weight).is_multiple_of(row_weight) {
        return Err(Error::InvalidParameter(format!(
            "{n} columns of weight {col_weight} do not fill rows of weight {row_weight}"
        )));
    }
    let m = n * col_weight / row_weight;

    'attempt: for attempt in 0..200u64 {
        let mut rng = seeds::rng(seed, &[attempt]);
        let mut capacity = vec![row_weight; m];
        let mut pair_used = vec![false; m * m];
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); m];

        for _col in 0..n {
            let mut placed: Option<Vec<usize>> = None;
            for _try in 0..200 {
                let mut avail: Vec<usize> = (0..m).filter(|&r| capacity[r] > 0).collect();
                if avail.len() < col_weight {
                    continue 'attempt;
                }
                avail.shuffle(&mut rng);
                let pick: Vec<usize> = avail.into_iter().take(col_weight).collect();
                let clash = pick.iter().enumerate().any(|(a, &ra)| {
                    pick[a + 1..].iter().any(|&rb| pair_used[ra * m + rb])
                });
                if !clash {
                    placed = Some(pick);
                    break;
                }
            }
            let Some(pick) = placed else { continue 'attempt };
            for (a, &ra) in pick.iter().enumerate() {
                capacity[ra] -= 1;
                for &rb in &pick[a + 1..] {
                    pair_used[ra * m + rb] = true;
                    pair_used[rb * m + ra] = true;
                }
            }
            for &r in &pick {
                rows[r].push(_col);
            }
        }

        let Ok(h) = ParityCheck::new(m, n, rows) else { continue };
        if systematize(&h).is_ok() {
            return Ok(h);
        }
    }
    Err(Error::Numerical(format!(
        "no full-rank ({col_weight},{row_weight})-regular code of length {n} found for this seed"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    /// (7,4) Hamming code parity-check matrix.
    fn hamming() -> ParityCheck {
        ParityCheck::new(
            3,
            7,
            vec![vec![0, 1, 2, 4], vec![0, 1, 3, 5], vec![0, 2, 3, 6]],
        )
        .unwrap()
    }

    const TINY_ALIST: &str = "\
6 3
3 4
1 3 2 2 1 1
4 3 3
1
1 2 3
1 2
2 3
1
3
1 2 3 5
2 3 4 0
2 4 6 0
";

    #[test]
    fn alist_round_trip_and_adjacency() {
        let h = load_alist(TINY_ALIST).unwrap();
        assert_eq!(h.n(), 6);
        assert_eq!(h.m(), 3);
        assert_eq!(h.rows()[0], vec![0, 1, 2, 4]);
        assert_eq!(h.rows()[1], vec![1, 2, 3]);
        assert_eq!(h.rows()[2], vec![1, 3, 5]);
        let text = to_alist(&h);
        let again = load_alist(&text).unwrap();
        assert_eq!(h, again);
    }

    #[test]
    fn alist_rejects_truncation_and_inconsistency() {
        let truncated: String = TINY_ALIST.lines().take(8).collect::<Vec<_>>().join("\n");
        assert!(matches!(load_alist(&truncated), Err(Error::AlistParse { .. })));

        let mut bad_degree = TINY_ALIST.to_string();
        bad_degree = bad_degree.replace("1 2 3 5", "1 2 3");
        assert!(matches!(load_alist(&bad_degree), Err(Error::AlistParse { .. })));

        // column 5 claiming check 2 disagrees with the row lists
        let mut lines: Vec<&str> = TINY_ALIST.lines().collect();
        lines[9] = "2";
        assert!(load_alist(&lines.join("\n")).is_err());

        assert!(matches!(load_alist("x y"), Err(Error::AlistParse { line: 1, .. })));
    }

    #[test]
    fn hamming_code_has_sixteen_codewords() {
        let code = systematize(&hamming()).unwrap();
        assert_eq!(code.k(), 4);
        let mut words = std::collections::BTreeSet::new();
        for msg in 0..16u32 {
            let info: Vec<u8> = (0..4).map(|i| ((msg >> i) & 1) as u8).collect();
            let c = code.encode(&info).unwrap();
            assert!(code.h().is_codeword(&c), "H·c != 0 for message {msg}");
            // information bits recoverable at known positions
            for (j, &pos) in code.info_positions().iter().enumerate() {
                assert_eq!(c[pos], info[j]);
            }
            words.insert(c);
        }
        assert_eq!(words.len(), 16);
    }

    #[test]
    fn all_zero_message_gives_all_zero_codeword() {
        let code = systematize(&hamming()).unwrap();
        assert_eq!(code.encode(&[0, 0, 0, 0]).unwrap(), vec![0u8; 7]);
    }

    #[test]
    fn rank_deficient_matrix_is_rejected() {
        // duplicate row
        let h =
            ParityCheck::new(2, 5, vec![vec![0, 1, 2, 3, 4], vec![0, 1, 2, 3, 4]]).unwrap();
        match systematize(&h) {
            Err(Error::RankDeficient { rank, rows }) => {
                assert_eq!(rank, 1);
                assert_eq!(rows, 2);
            }
            other => panic!("expected rank error, got {other:?}"),
        }
    }

    #[test]
    fn parity_check_validation() {
        assert!(ParityCheck::new(3, 3, vec![vec![0]; 3]).is_err()); // m >= n
        assert!(ParityCheck::new(1, 3, vec![vec![]]).is_err()); // empty row
        assert!(ParityCheck::new(1, 3, vec![vec![0, 0]]).is_err()); // duplicate
        assert!(ParityCheck::new(1, 3, vec![vec![3]]).is_err()); // out of range
        assert!(ParityCheck::new(1, 3, vec![vec![0, 1]]).is_err()); // empty column 2
    }

    #[test]
    fn decode_noise_free_codeword_is_immediate() {
        let code = systematize(&hamming()).unwrap();
        let info = [1, 0, 1, 1];
        let c = code.encode(&info).unwrap();
        let llrs: Vec<f64> = c.iter().map(|&b| if b == 0 { 20.0 } else { -20.0 }).collect();
        let outs = decode_bp(&llrs, &code, 3).unwrap();
        for (p, &b) in outs.iterations[0].values.iter().zip(&info) {
            assert!((p - b as f64).abs() < 1e-6, "p={p} for bit {b}");
        }
    }

    #[test]
    fn decode_corrects_every_single_flip() {
        // Exhaustive: every codeword, every flipped position. The flipped bit
        // is confident but weaker than the correct ones, as a noise event
        // that crosses the decision boundary always is.
        let code = systematize(&hamming()).unwrap();
        for msg in 0..16u32 {
            let info: Vec<u8> = (0..4).map(|i| ((msg >> i) & 1) as u8).collect();
            let c = code.encode(&info).unwrap();
            for flip in 0..7 {
                let llrs: Vec<f64> = c
                    .iter()
                    .enumerate()
                    .map(|(i, &b)| {
                        let sign = if b == 0 { 1.0 } else { -1.0 };
                        if i == flip { -6.0 * sign } else { 12.0 * sign }
                    })
                    .collect();
                let outs = decode_bp(&llrs, &code, 5).unwrap();
                let hard = outs.last().hard();
                assert_eq!(hard, info, "message {msg} flip {flip}");
            }
        }
    }

    #[test]
    fn zero_llrs_stay_at_one_half() {
        let code = systematize(&hamming()).unwrap();
        let outs = decode_bp(&[0.0; 7], &code, 4).unwrap();
        for it in &outs.iterations {
            assert!(it.values.iter().all(|&p| p == 0.5));
        }
    }

    #[test]
    fn outputs_strictly_inside_unit_interval() {
        let code = systematize(&hamming()).unwrap();
        let llrs = [1e9, -1e9, 50.0, -50.0, 0.0, 3.0, -3.0];
        let outs = decode_bp(&llrs, &code, 10).unwrap();
        for it in &outs.iterations {
            for &p in &it.values {
                assert!(p > 0.0 && p < 1.0, "p = {p}");
            }
        }
    }

    #[test]
    fn decode_rejects_bad_input() {
        let code = systematize(&hamming()).unwrap();
        assert!(decode_bp(&[0.0; 6], &code, 5).is_err());
        assert!(decode_bp(&[0.0; 7], &code, 0).is_err());
    }

    #[test]
    fn generated_code_round_trips_random_messages() {
        let h = generate_regular_ldpc(128, 3, 6, 7).unwrap();
        assert_eq!(h.m(), 64);
        let code = systematize(&h).unwrap();
        assert_eq!(code.k(), 64);
        let mut rng = seeds::rng(123, &[]);
        for _ in 0..50 {
            let info: Vec<u8> = (0..code.k()).map(|_| rng.random_range(0..2) as u8).collect();
            let c = code.encode(&info).unwrap();
            assert!(code.h().is_codeword(&c));
            let llrs: Vec<f64> = c.iter().map(|&b| if b == 0 { 12.0 } else { -12.0 }).collect();
            let outs = decode_bp(&llrs, &code, 5).unwrap();
            assert_eq!(outs.last().hard(), info);
        }
    }

    #[test]
    fn generator_avoids_four_cycles() {
        let h = generate_regular_ldpc(64, 3, 6, 1).unwrap();
        // no two checks share more than one variable
        for a in 0..h.m() {
            for b in (a + 1)..h.m() {
                let shared = h.rows()[a].iter().filter(|v| h.rows()[b].contains(v)).count();
                assert!(shared <= 1, "checks {a} and {b} share {shared} variables");
            }
        }
    }

    /// On the fixture code above the waterfall, the hard-decision error count
    /// does not increase over decoding iterations.
    #[test]
    fn iteration_errors_are_non_increasing_at_moderate_snr() {
        let code = systematize(&load_alist(include_str!("../codes/ldpc_n256_k128.alist")).unwrap())
            .unwrap();
        let mut rng = seeds::rng(2024, &[]);
        let sigma: f64 = 0.55; // BPSK raw BER ~3.5%, above the decoder threshold
        let n_iters = 12;
        let mut errors_per_iter = vec![0u64; n_iters];
        for _ in 0..40 {
            let info: Vec<u8> = (0..code.k()).map(|_| rng.random_range(0..2u8)).collect();
            let c = code.encode(&info).unwrap();
            let llrs: Vec<f64> = c
                .iter()
                .map(|&b| {
                    let x = if b == 0 { 1.0 } else { -1.0 };
                    let noise: f64 = rng.sample(rand_distr::StandardNormal);
                    2.0 * (x + sigma * noise) / (sigma * sigma)
                })
                .collect();
            let outs = decode_bp(&llrs, &code, n_iters).unwrap();
            for (it, out) in outs.iterations.iter().enumerate() {
                errors_per_iter[it] += out
                    .hard()
                    .iter()
                    .zip(&info)
                    .filter(|(a, b)| a != b)
                    .count() as u64;
            }
        }
        assert!(errors_per_iter[0] > 0, "operating point must exercise the decoder");
        for w in errors_per_iter.windows(2) {
            assert!(w[1] <= w[0], "errors rose across iterations: {errors_per_iter:?}");
        }
        assert_eq!(*errors_per_iter.last().unwrap(), 0, "decoder converges at this SNR");
    }

    #[test]
    fn shipped_fixture_matches_generator() {
        let text = include_str!("../codes/ldpc_n256_k128.alist");
        let h = load_alist(text).unwrap();
        assert_eq!((h.n(), h.m()), (256, 128));
        let regenerated = generate_regular_ldpc(256, 3, 6, 0).unwrap();
        assert_eq!(to_alist(&regenerated), text);
        let code = systematize(&h).unwrap();
        assert_eq!(code.k(), 128);
    }

    #[test]
    fn probability_llr_conversion_matches_convention() {
        let soft = SoftBits { values: vec![0.5, 0.9, 0.1] };
        let llrs = probabilities_to_llrs(&soft);
        assert!(llrs[0].abs() < 1e-12);
        assert!(llrs[1] < 0.0, "P(b=1)=0.9 must favor bit 1 (negative LLR)");
        assert!(llrs[2] > 0.0);
    }
}
