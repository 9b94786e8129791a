//! Parameterized transformation circuits: ordered products of
//! Pauli-exponential factors with shared parameters.
//!
//! Factors are stored leftmost-first as the operator product reads, so
//! applying `U` to a state walks the list from the back. A factor
//! `(generator, index, scale)` contributes `exp(i generator scale theta[index])`.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::dense::DenseOperator;
use crate::error::{Result, SwtError};
use crate::pauli::{PauliLetter, PauliString, PauliSum};
use crate::policy::NumericPolicy;
use crate::state::StateVector;

#[derive(Debug, Clone, PartialEq)]
pub struct AnsatzFactor {
    pub generator: PauliString,
    pub parameter_index: usize,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterizedCircuit {
    n_qubits: usize,
    factors: Vec<AnsatzFactor>,
    n_parameters: usize,
}

impl ParameterizedCircuit {
    /// Build from factors listed leftmost-first. Parameter indices must cover
    /// `0..max+1` without gaps.
    pub fn new(n_qubits: usize, factors: Vec<AnsatzFactor>) -> Result<Self> {
        for f in &factors {
            if f.generator.n_qubits() != n_qubits {
                return Err(SwtError::DimensionMismatch {
                    left: n_qubits,
                    right: f.generator.n_qubits(),
                });
            }
            if !f.scale.is_finite() {
                return Err(SwtError::Invalid("non-finite factor scale".into()));
            }
        }
        let n_parameters = factors.iter().map(|f| f.parameter_index + 1).max().unwrap_or(0);
        let mut used = vec![false; n_parameters];
        for f in &factors {
            used[f.parameter_index] = true;
        }
        if used.iter().any(|u| !u) {
            return Err(SwtError::Invalid("unused parameter index in circuit".into()));
        }
        Ok(Self { n_qubits, factors, n_parameters })
    }

    pub fn empty(n_qubits: usize) -> Self {
        Self { n_qubits, factors: Vec::new(), n_parameters: 0 }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_parameters(&self) -> usize {
        self.n_parameters
    }

    pub fn factors(&self) -> &[AnsatzFactor] {
        &self.factors
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.n_parameters {
            return Err(SwtError::ParameterLength {
                got: theta.len(),
                expected: self.n_parameters,
            });
        }
        Ok(())
    }

    /// Apply `U(theta)` (or its adjoint) to a state. The adjoint reverses the
    /// factor order and negates the angles; a forward-then-adjoint pass
    /// restores the input.
    pub fn apply(&self, state: &StateVector, theta: &[f64], adjoint: bool) -> Result<StateVector> {
        self.check_theta(theta)?;
        if state.n_qubits() != self.n_qubits {
            return Err(SwtError::DimensionMismatch {
                left: state.n_qubits(),
                right: self.n_qubits,
            });
        }
        let mut out = state.clone();
        if adjoint {
            for f in &self.factors {
                let angle = -2.0 * f.scale * theta[f.parameter_index];
                out = out.apply_pauli_rotation(&f.generator, angle)?;
            }
        } else {
            for f in self.factors.iter().rev() {
                let angle = 2.0 * f.scale * theta[f.parameter_index];
                out = out.apply_pauli_rotation(&f.generator, angle)?;
            }
        }
        Ok(out)
    }

    /// Apply with stochastic two-qubit Pauli insertions. A weight-w factor is
    /// charged `2(w-1)` entangling steps (the ladder a hardware compilation
    /// would use); after each step a uniform non-identity two-qubit Pauli hits
    /// that step's pair with probability `error_prob`. With `error_prob = 0`
    /// no randomness is consumed, so the trajectory equals the noiseless path
    /// under any shared generator.
    pub fn apply_noisy(
        &self,
        state: &StateVector,
        theta: &[f64],
        adjoint: bool,
        error_prob: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<StateVector> {
        self.check_theta(theta)?;
        let mut out = state.clone();
        let order: Vec<&AnsatzFactor> = if adjoint {
            self.factors.iter().collect()
        } else {
            self.factors.iter().rev().collect()
        };
        for f in order {
            let sign = if adjoint { -1.0 } else { 1.0 };
            let angle = sign * 2.0 * f.scale * theta[f.parameter_index];
            out = out.apply_pauli_rotation(&f.generator, angle)?;
            if error_prob > 0.0 {
                let support = f.generator.support();
                if support.len() >= 2 {
                    let mut ladder: Vec<(usize, usize)> = support
                        .windows(2)
                        .map(|w| (w[0], w[1]))
                        .collect();
                    let up: Vec<(usize, usize)> = ladder.iter().rev().copied().collect();
                    ladder.extend(up);
                    for (a, b) in ladder {
                        if rng.gen::<f64>() < error_prob {
                            out = out.apply_pauli(&random_two_qubit_pauli(
                                self.n_qubits,
                                a,
                                b,
                                rng,
                            ))?;
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Dense matrix of `U(theta)`.
    pub fn dense_unitary(&self, theta: &[f64], policy: &NumericPolicy) -> Result<DenseOperator> {
        self.check_theta(theta)?;
        if self.n_qubits > policy.dense_qubit_cap {
            return Err(SwtError::ResourceCap {
                qubits: self.n_qubits,
                cap: policy.dense_qubit_cap,
            });
        }
        let mut u = DenseOperator::identity(self.n_qubits);
        for f in &self.factors {
            let a = f.scale * theta[f.parameter_index];
            let sigma = f.generator.to_dense(policy)?;
            let factor = DenseOperator::identity(self.n_qubits)
                .scaled(Complex64::new(a.cos(), 0.0))
                .add(&sigma.scaled(Complex64::new(0.0, a.sin())));
            u = u.dot(&factor);
        }
        Ok(u)
    }
}

/// Text form: one `<letters> <parameter_index> <scale>` line per factor, in
/// product order.
impl std::fmt::Display for ParameterizedCircuit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (idx, factor) in self.factors.iter().enumerate() {
            if idx > 0 {
                writeln!(f)?;
            }
            write!(
                f,
                "{} {} {:?}",
                factor.generator, factor.parameter_index, factor.scale
            )?;
        }
        Ok(())
    }
}

impl std::str::FromStr for ParameterizedCircuit {
    type Err = SwtError;

    fn from_str(s: &str) -> Result<Self> {
        let mut factors = Vec::new();
        let mut n_qubits = None;
        for line in s.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(SwtError::Parse(format!(
                    "expected '<letters> <parameter_index> <scale>', got '{line}'"
                )));
            }
            let generator: PauliString = fields[0].parse()?;
            let parameter_index: usize = fields[1]
                .parse()
                .map_err(|_| SwtError::Parse(format!("bad parameter index '{}'", fields[1])))?;
            let scale: f64 = fields[2]
                .parse()
                .map_err(|_| SwtError::Parse(format!("bad scale '{}'", fields[2])))?;
            match n_qubits {
                None => n_qubits = Some(generator.n_qubits()),
                Some(n) if n != generator.n_qubits() => {
                    return Err(SwtError::DimensionMismatch {
                        left: n,
                        right: generator.n_qubits(),
                    })
                }
                _ => {}
            }
            factors.push(AnsatzFactor { generator, parameter_index, scale });
        }
        let n = n_qubits.ok_or_else(|| SwtError::Parse("empty circuit text".into()))?;
        Self::new(n, factors)
    }
}

fn random_two_qubit_pauli(
    n_qubits: usize,
    a: usize,
    b: usize,
    rng: &mut ChaCha8Rng,
) -> PauliString {
    let letters = [PauliLetter::I, PauliLetter::X, PauliLetter::Y, PauliLetter::Z];
    // 15 non-identity pairs
    let choice = rng.gen_range(1..16usize);
    let mut s = PauliString::identity(n_qubits);
    let la = letters[choice / 4];
    let lb = letters[choice % 4];
    if la != PauliLetter::I {
        s = combine(s, PauliString::single(n_qubits, a, la));
    }
    if lb != PauliLetter::I {
        s = combine(s, PauliString::single(n_qubits, b, lb));
    }
    s
}

fn combine(a: PauliString, b: PauliString) -> PauliString {
    a.product(&b).expect("same register").1
}

/// One factor per term of the commutator `[h0, v] = i K`, in canonical term
/// order, each with its own parameter and scale 1/2. Commuting inputs yield
/// the empty circuit, whose transformation is the identity.
pub fn ansatz_from_commutator(h0: &PauliSum, v: &PauliSum) -> Result<ParameterizedCircuit> {
    let k = h0.hermitian_commutator(v)?;
    let factors = k
        .terms()
        .iter()
        .enumerate()
        .map(|(idx, (_, string))| AnsatzFactor {
            generator: *string,
            parameter_index: idx,
            scale: 0.5,
        })
        .collect();
    ParameterizedCircuit::new(h0.n_qubits(), factors)
}

/// The fixed 4-spin transformation: six weight-3 factors sharing three
/// parameters, mirror-symmetric about the chain center.
pub fn preset_n4_ansatz() -> ParameterizedCircuit {
    let spec: [(&str, usize); 6] = [
        ("IZYX", 0),
        ("IZXY", 1),
        ("IYXZ", 2),
        ("ZXYI", 2),
        ("YXZI", 1),
        ("XYZI", 0),
    ];
    let factors = spec
        .iter()
        .map(|(letters, idx)| AnsatzFactor {
            generator: letters.parse().expect("valid letters"),
            parameter_index: *idx,
            scale: 0.5,
        })
        .collect();
    ParameterizedCircuit::new(4, factors).expect("well-formed preset")
}

/// Optional greedy pruning helper (not used by the shipped pipelines): drop
/// factors whose parameter has cost-gradient magnitude below `threshold` at
/// theta = 0, estimated by central differences, then reindex the survivors.
pub fn prune_by_gradient(
    circuit: &ParameterizedCircuit,
    cost: impl Fn(&[f64]) -> f64,
    threshold: f64,
) -> Result<ParameterizedCircuit> {
    let n = circuit.n_parameters();
    let h = 1e-4;
    let mut keep = vec![false; n];
    for idx in 0..n {
        let mut plus = vec![0.0; n];
        let mut minus = vec![0.0; n];
        plus[idx] = h;
        minus[idx] = -h;
        let gradient = (cost(&plus) - cost(&minus)) / (2.0 * h);
        keep[idx] = gradient.abs() >= threshold;
    }
    let mut remap = vec![usize::MAX; n];
    let mut next = 0;
    for (idx, keep_it) in keep.iter().enumerate() {
        if *keep_it {
            remap[idx] = next;
            next += 1;
        }
    }
    let factors = circuit
        .factors()
        .iter()
        .filter(|f| keep[f.parameter_index])
        .map(|f| AnsatzFactor {
            generator: f.generator,
            parameter_index: remap[f.parameter_index],
            scale: f.scale,
        })
        .collect();
    ParameterizedCircuit::new(circuit.n_qubits(), factors)
}
