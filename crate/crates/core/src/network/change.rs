use super::{AcModel, Branch, BusId, BusKind, DcModel, Generator, NetworkError, PowerSystem};
use serde::{Deserialize, Serialize};

/// An edit to the network. Branch and generator references are 1-based
/// labels in file order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Change {
    BusLoad {
        bus: BusId,
        #[serde(default)]
        active: Option<f64>,
        #[serde(default)]
        reactive: Option<f64>,
    },
    BusShunt {
        bus: BusId,
        #[serde(default)]
        conductance: Option<f64>,
        #[serde(default)]
        susceptance: Option<f64>,
    },
    BusKind {
        bus: BusId,
        kind: BusKind,
    },
    BranchStatus {
        branch: usize,
        in_service: bool,
    },
    BranchParameters {
        branch: usize,
        #[serde(default)]
        resistance: Option<f64>,
        #[serde(default)]
        reactance: Option<f64>,
        #[serde(default)]
        shunt_conductance: Option<f64>,
        #[serde(default)]
        shunt_susceptance: Option<f64>,
        #[serde(default)]
        turns_ratio: Option<f64>,
        #[serde(default)]
        phase_shift: Option<f64>,
    },
    AddBranch {
        branch: Branch,
    },
    GeneratorOutput {
        generator: usize,
        #[serde(default)]
        active: Option<f64>,
        #[serde(default)]
        reactive: Option<f64>,
    },
    GeneratorStatus {
        generator: usize,
        in_service: bool,
    },
    AddGenerator {
        generator: Generator,
    },
}

/// What a matrix lost by a change.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Dirty {
    #[default]
    Clean,
    /// Same sparsity pattern, new values.
    Values,
    /// New sparsity pattern.
    Pattern,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ChangeEffect {
    pub ac: Dirty,
    pub dc: Dirty,
    /// Loads, generation, or constant injection terms changed.
    pub injections: bool,
    /// Bus types or generator availability changed.
    pub bus_kinds: bool,
}

impl ChangeEffect {
    fn merge(&mut self, other: ChangeEffect) {
        self.ac = self.ac.max(other.ac);
        self.dc = self.dc.max(other.dc);
        self.injections |= other.injections;
        self.bus_kinds |= other.bus_kinds;
    }
}

impl PowerSystem {
    fn bus_pos(&self, id: BusId) -> Result<usize, NetworkError> {
        self.bus_index(id).ok_or(NetworkError::UnknownBus(id))
    }

    fn branch_pos(&self, label: usize) -> Result<usize, NetworkError> {
        if label == 0 || label > self.branches.len() {
            Err(NetworkError::UnknownBranch(label))
        } else {
            Ok(label - 1)
        }
    }

    fn generator_pos(&self, label: usize) -> Result<usize, NetworkError> {
        if label == 0 || label > self.generators.len() {
            Err(NetworkError::UnknownGenerator(label))
        } else {
            Ok(label - 1)
        }
    }

    /// Applies several changes; the effect is the union of the individual ones.
    pub fn apply_all(&mut self, changes: &[Change]) -> Result<ChangeEffect, NetworkError> {
        let mut total = ChangeEffect::default();
        for c in changes {
            total.merge(self.apply(c)?);
        }
        Ok(total)
    }

    /// Applies one change, patching the stored matrices in place.
    pub fn apply(&mut self, change: &Change) -> Result<ChangeEffect, NetworkError> {
        let mut eff = ChangeEffect::default();
        match change {
            Change::BusLoad { bus, active, reactive } => {
                let i = self.bus_pos(*bus)?;
                let b = &mut self.buses[i];
                if let Some(p) = active {
                    b.active_load = *p;
                }
                if let Some(q) = reactive {
                    b.reactive_load = *q;
                }
                eff.injections = true;
            }
            Change::BusShunt {
                bus,
                conductance,
                susceptance,
            } => {
                let i = self.bus_pos(*bus)?;
                let (g0, b0) = (self.buses[i].shunt_conductance, self.buses[i].shunt_susceptance);
                let g1 = conductance.unwrap_or(g0);
                let b1 = susceptance.unwrap_or(b0);
                self.ac.add_shunt(i, g0, b0, -1.0);
                self.ac.add_shunt(i, g1, b1, 1.0);
                if let Some(dc) = &mut self.dc {
                    dc.add_bus_shunt(i, g1 - g0);
                }
                self.buses[i].shunt_conductance = g1;
                self.buses[i].shunt_susceptance = b1;
                eff.ac = Dirty::Values;
                eff.injections = g1 != g0;
            }
            Change::BusKind { bus, kind } => {
                let i = self.bus_pos(*bus)?;
                if *kind == BusKind::Slack {
                    if let Some(s) = self.buses.iter().find(|b| b.kind == BusKind::Slack && b.id != *bus) {
                        return Err(NetworkError::DuplicateSlack(s.id, *bus));
                    }
                }
                self.buses[i].kind = *kind;
                eff.bus_kinds = true;
            }
            Change::BranchStatus { branch, in_service } => {
                let k = self.branch_pos(*branch)?;
                if self.branches[k].in_service != *in_service {
                    let mut updated = self.branches[k].clone();
                    updated.in_service = *in_service;
                    eff = self.replace_branch(k, updated)?;
                }
            }
            Change::BranchParameters {
                branch,
                resistance,
                reactance,
                shunt_conductance,
                shunt_susceptance,
                turns_ratio,
                phase_shift,
            } => {
                let k = self.branch_pos(*branch)?;
                let mut updated = self.branches[k].clone();
                let fields = [
                    (&mut updated.resistance, resistance),
                    (&mut updated.reactance, reactance),
                    (&mut updated.shunt_conductance, shunt_conductance),
                    (&mut updated.shunt_susceptance, shunt_susceptance),
                    (&mut updated.turns_ratio, turns_ratio),
                    (&mut updated.phase_shift, phase_shift),
                ];
                for (slot, value) in fields {
                    if let Some(v) = value {
                        *slot = *v;
                    }
                }
                self.check_branch(*branch, &updated)?;
                eff = self.replace_branch(k, updated)?;
            }
            Change::AddBranch { branch } => {
                let label = self.branches.len() + 1;
                self.check_branch(label, branch)?;
                let f = self.bus_pos(branch.from_bus)?;
                let t = self.bus_pos(branch.to_bus)?;
                self.branches.push(branch.clone());
                let k = label - 1;
                if self.ac.reuse_slots_for(f, t) {
                    self.ac.add_branch(k, branch, 1.0);
                    eff.ac = Dirty::Values;
                } else {
                    self.ac = AcModel::build(self)?;
                    eff.ac = Dirty::Pattern;
                }
                let dc_ok = !(branch.in_service && branch.reactance == 0.0);
                let mut dc_reused = false;
                if let Some(dc) = self.dc.as_mut().filter(|_| dc_ok) {
                    if dc.reuse_slots_for(f, t) {
                        dc.add_branch(k, f, t, branch, 1.0);
                        dc_reused = true;
                    }
                }
                if dc_reused {
                    eff.dc = Dirty::Values;
                } else {
                    self.dc = DcModel::build(self).ok();
                    eff.dc = Dirty::Pattern;
                }
                eff.injections = branch.phase_shift != 0.0 || branch.shunt_conductance != 0.0;
            }
            Change::GeneratorOutput {
                generator,
                active,
                reactive,
            } => {
                let k = self.generator_pos(*generator)?;
                let g = &mut self.generators[k];
                if let Some(p) = active {
                    g.active_power = *p;
                }
                if let Some(q) = reactive {
                    g.reactive_power = *q;
                }
                eff.injections = true;
            }
            Change::GeneratorStatus { generator, in_service } => {
                let k = self.generator_pos(*generator)?;
                if self.generators[k].in_service != *in_service {
                    self.generators[k].in_service = *in_service;
                    eff.injections = true;
                    eff.bus_kinds = true;
                }
            }
            Change::AddGenerator { generator } => {
                self.check_generator(self.generators.len() + 1, generator)?;
                self.generators.push(generator.clone());
                eff.injections = true;
                eff.bus_kinds = true;
            }
        }
        self.bump(eff);
        Ok(eff)
    }

    fn replace_branch(&mut self, k: usize, updated: Branch) -> Result<ChangeEffect, NetworkError> {
        let mut eff = ChangeEffect::default();
        let old = std::mem::replace(&mut self.branches[k], updated);
        let new = self.branches[k].clone();
        let (f, t) = self.branch_ends(k);
        self.ac.add_branch(k, &old, -1.0);
        self.ac.add_branch(k, &new, 1.0);
        eff.ac = Dirty::Values;

        let dc_valid = !(new.in_service && new.reactance == 0.0);
        match (&mut self.dc, dc_valid) {
            (Some(dc), true) => {
                dc.add_branch(k, f, t, &old, -1.0);
                dc.add_branch(k, f, t, &new, 1.0);
                let (b0, b1) = (super::branch_susceptance(&old), super::branch_susceptance(&new));
                if b0.to_bits() != b1.to_bits() {
                    eff.dc = Dirty::Values;
                }
                eff.injections = DcModel::constant_terms(&old) != DcModel::constant_terms(&new);
            }
            (_, false) => {
                self.dc = None;
                eff.dc = Dirty::Pattern;
            }
            (None, true) => {
                self.dc = DcModel::build(self).ok();
                eff.dc = Dirty::Pattern;
                eff.injections = true;
            }
        }
        Ok(eff)
    }

    fn bump(&mut self, eff: ChangeEffect) {
        let now = self.tick();
        let r = &mut self.revisions;
        match eff.ac {
            Dirty::Clean => {}
            Dirty::Values => r.ac_values = now,
            Dirty::Pattern => {
                r.ac_values = now;
                r.ac_pattern = now;
            }
        }
        match eff.dc {
            Dirty::Clean => {}
            Dirty::Values => r.dc_values = now,
            Dirty::Pattern => {
                r.dc_values = now;
                r.dc_pattern = now;
            }
        }
        if eff.injections {
            r.injections = now;
        }
        if eff.bus_kinds {
            r.bus_kinds = now;
        }
    }

    /// Rebuilds both matrix models from the element data.
    pub fn rebuilt(&self) -> Result<(AcModel, Option<DcModel>), NetworkError> {
        Ok((AcModel::build(self)?, DcModel::build(self).ok()))
    }
}
