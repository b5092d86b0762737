//! Reduced words in the free group `F_k` (degree `2k`) and in the free product of
//! `d` copies of `Z/2`, together with breadth-first enumeration of tree balls.
//!
//! The Cayley tree is taken with edges `{g, s·g}` (left multiplication), so a
//! ball is grown by prepending generators and the action `g ↦ γ(g)(v)` on a
//! permutation-labeled graph is a graph homomorphism from the tree.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default cap on the number of elements a [`TreeBall`] may hold.
pub const DEFAULT_BALL_BUDGET: usize = 1 << 22;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GroupError {
    #[error("generator index {index} out of range 1..={max}")]
    LetterOutOfRange { index: i32, max: usize },
    #[error("words belong to different groups ({0} vs {1})")]
    ParityMismatch(Parity, Parity),
    #[error("ball of radius {radius} has {size} elements, budget is {budget}")]
    BallTooLarge {
        radius: usize,
        size: u128,
        budget: usize,
    },
}

/// Which group realizes the `d`-regular tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Parity {
    /// Free group on `k` generators, degree `d = 2k`.
    EvenFree { k: usize },
    /// Free product of `d` involutions `s_i² = e`.
    Involutive { d: usize },
}

impl fmt::Display for Parity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Parity::EvenFree { k } => write!(f, "even(d={})", 2 * k),
            Parity::Involutive { d } => write!(f, "inv(d={d})"),
        }
    }
}

impl Parity {
    /// Builds the parity for a tree of degree `d`, `even` selecting the free group.
    pub fn from_degree(even: bool, d: usize) -> Option<Parity> {
        if d == 0 {
            return None;
        }
        if even {
            (d % 2 == 0).then_some(Parity::EvenFree { k: d / 2 })
        } else {
            Some(Parity::Involutive { d })
        }
    }

    pub fn degree(&self) -> usize {
        match *self {
            Parity::EvenFree { k } => 2 * k,
            Parity::Involutive { d } => d,
        }
    }

    /// Number of generator permutations (`k` or `d`).
    pub fn num_generators(&self) -> usize {
        match *self {
            Parity::EvenFree { k } => k,
            Parity::Involutive { d } => d,
        }
    }

    pub fn is_involutive(&self) -> bool {
        matches!(self, Parity::Involutive { .. })
    }

    /// All letters labelling tree edges out of a vertex, in enumeration order:
    /// `+1..+k, -1..-k` for the free group, `1..d` for involutions.
    pub fn letters(&self) -> Vec<i32> {
        match *self {
            Parity::EvenFree { k } => {
                let k = k as i32;
                (1..=k).chain((1..=k).map(|i| -i)).collect()
            }
            Parity::Involutive { d } => (1..=d as i32).collect(),
        }
    }

    pub fn inverse_letter(&self, letter: i32) -> i32 {
        if self.is_involutive() {
            letter
        } else {
            -letter
        }
    }

    fn normalize_letter(&self, letter: i32) -> Result<i32, GroupError> {
        let max = self.num_generators();
        if letter == 0 || letter.unsigned_abs() as usize > max {
            return Err(GroupError::LetterOutOfRange { index: letter, max });
        }
        Ok(if self.is_involutive() {
            letter.abs()
        } else {
            letter
        })
    }

    /// Reduces an arbitrary letter sequence to its unique reduced form.
    pub fn reduce(&self, letters: &[i32]) -> Result<Word, GroupError> {
        let mut out: Vec<i32> = Vec::with_capacity(letters.len());
        for &raw in letters {
            let l = self.normalize_letter(raw)?;
            if out.last() == Some(&self.inverse_letter(l)) {
                out.pop();
            } else {
                out.push(l);
            }
        }
        Ok(Word {
            parity: *self,
            letters: out,
        })
    }

    pub fn identity(&self) -> Word {
        Word {
            parity: *self,
            letters: Vec::new(),
        }
    }

    /// The generator `s_i` (or `s_i⁻¹` for negative `letter`) as a word.
    pub fn generator(&self, letter: i32) -> Result<Word, GroupError> {
        self.reduce(&[letter])
    }

    /// Size of the ball of radius `r` in the `d`-regular tree.
    pub fn ball_size(&self, r: usize) -> u128 {
        let d = self.degree() as u128;
        match d {
            1 => {
                if r == 0 {
                    1
                } else {
                    2
                }
            }
            2 => 2 * r as u128 + 1,
            _ => 1 + d * ((d - 1).pow(r as u32) - 1) / (d - 2),
        }
    }

    /// Edge-orbit representatives `{e, s_i}`, one per generator.
    pub fn canonical_edge_transversal(&self) -> Vec<[Word; 2]> {
        (1..=self.num_generators() as i32)
            .map(|i| {
                [
                    self.identity(),
                    Word {
                        parity: *self,
                        letters: vec![i],
                    },
                ]
            })
            .collect()
    }
}

/// A reduced group element; the empty word is the identity (the tree root).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Word {
    parity: Parity,
    letters: Vec<i32>,
}

impl Word {
    pub fn parity(&self) -> Parity {
        self.parity
    }

    pub fn letters(&self) -> &[i32] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_identity(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn multiply(&self, other: &Word) -> Result<Word, GroupError> {
        if self.parity != other.parity {
            return Err(GroupError::ParityMismatch(self.parity, other.parity));
        }
        let mut out = self.letters.clone();
        for &l in &other.letters {
            if out.last() == Some(&self.parity.inverse_letter(l)) {
                out.pop();
            } else {
                out.push(l);
            }
        }
        Ok(Word {
            parity: self.parity,
            letters: out,
        })
    }

    pub fn inverse(&self) -> Word {
        Word {
            parity: self.parity,
            letters: self
                .letters
                .iter()
                .rev()
                .map(|&l| self.parity.inverse_letter(l))
                .collect(),
        }
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.letters.is_empty() {
            return write!(f, "e");
        }
        for (i, l) in self.letters.iter().enumerate() {
            if i > 0 {
                write!(f, "·")?;
            }
            if *l < 0 {
                write!(f, "s{}⁻¹", -l)?;
            } else {
                write!(f, "s{l}")?;
            }
        }
        Ok(())
    }
}

/// The closed ball `T_d(r)` around the identity, enumerated breadth-first.
///
/// Element `i > 0` equals `edge_letter[i] · elements[parent[i]]`, so every
/// parent precedes its children and the first letter of a word is the colour of
/// the edge towards the root.
#[derive(Debug, Clone)]
pub struct TreeBall {
    parity: Parity,
    radius: usize,
    elements: Vec<Word>,
    parent: Vec<usize>,
    edge_letter: Vec<i32>,
    depth: Vec<usize>,
    children: Vec<Vec<usize>>,
    index: HashMap<Vec<i32>, usize>,
}

impl TreeBall {
    pub fn new(parity: Parity, radius: usize) -> Result<TreeBall, GroupError> {
        Self::with_budget(parity, radius, DEFAULT_BALL_BUDGET)
    }

    pub fn with_budget(
        parity: Parity,
        radius: usize,
        budget: usize,
    ) -> Result<TreeBall, GroupError> {
        let size = parity.ball_size(radius);
        if size > budget as u128 {
            return Err(GroupError::BallTooLarge {
                radius,
                size,
                budget,
            });
        }
        let size = size as usize;
        let mut ball = TreeBall {
            parity,
            radius,
            elements: Vec::with_capacity(size),
            parent: Vec::with_capacity(size),
            edge_letter: Vec::with_capacity(size),
            depth: Vec::with_capacity(size),
            children: Vec::with_capacity(size),
            index: HashMap::with_capacity(size),
        };
        ball.push(parity.identity(), 0, 0, 0);
        let letters = parity.letters();
        let mut head = 0;
        while head < ball.elements.len() {
            if ball.depth[head] < radius {
                for &s in &letters {
                    let w = &ball.elements[head];
                    if w.letters.first() == Some(&parity.inverse_letter(s)) {
                        continue;
                    }
                    let mut child = Vec::with_capacity(w.len() + 1);
                    child.push(s);
                    child.extend_from_slice(&w.letters);
                    let depth = ball.depth[head] + 1;
                    let word = Word {
                        parity,
                        letters: child,
                    };
                    let idx = ball.push(word, head, s, depth);
                    ball.children[head].push(idx);
                }
            }
            head += 1;
        }
        debug_assert_eq!(ball.elements.len(), size);
        Ok(ball)
    }

    fn push(&mut self, word: Word, parent: usize, letter: i32, depth: usize) -> usize {
        let idx = self.elements.len();
        self.index.insert(word.letters.clone(), idx);
        self.elements.push(word);
        self.parent.push(parent);
        self.edge_letter.push(letter);
        self.depth.push(depth);
        self.children.push(Vec::new());
        idx
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[Word] {
        &self.elements
    }

    pub fn element(&self, i: usize) -> &Word {
        &self.elements[i]
    }

    /// Parent index; the root is its own parent.
    pub fn parent(&self, i: usize) -> usize {
        self.parent[i]
    }

    pub fn parents(&self) -> &[usize] {
        &self.parent
    }

    /// Letter `s` with `element(i) = s · element(parent(i))`; 0 for the root.
    pub fn edge_letter(&self, i: usize) -> i32 {
        self.edge_letter[i]
    }

    pub fn depth(&self, i: usize) -> usize {
        self.depth[i]
    }

    pub fn children(&self, i: usize) -> &[usize] {
        &self.children[i]
    }

    /// Number of elements at depth `< r` (a prefix of the enumeration).
    pub fn prefix_len(&self, r: usize) -> usize {
        if r > self.radius {
            self.len()
        } else {
            self.parity.ball_size(r) as usize
        }
    }

    pub fn index_of(&self, w: &Word) -> Option<usize> {
        if w.parity != self.parity {
            return None;
        }
        self.index.get(&w.letters).copied()
    }
}
