//! Gateway-side access control for LTE-U microcells.
//!
//! Each microcell is registered with an owner and a list of permanently
//! authorized users. Anyone else may ask the owner for temporary access; a
//! temporary grant lives exactly as long as the session it was requested for.
//! Operator-deployed cells are registered open: every user is authorized.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::topology::CellId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct UserId(pub u32);

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "user{}", self.0)
    }
}

/// Owner of operator-deployed cells.
pub const OPERATOR: UserId = UserId(u32::MAX);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SessionId(pub u64);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AuthError {
    #[error("cell {0} is already registered")]
    DuplicateCell(CellId),
    #[error("cell {0} is not registered")]
    UnknownCell(CellId),
    #[error("{user} does not administer cell {cell}")]
    PermissionDenied { cell: CellId, user: UserId },
    #[error("{user} has no pending request for cell {cell}")]
    NoPendingRequest { cell: CellId, user: UserId },
    #[error("{user} is already authorized for cell {cell}")]
    AlreadyAuthorized { cell: CellId, user: UserId },
    #[error("{user} already has a pending request for cell {cell}")]
    AlreadyPending { cell: CellId, user: UserId },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrantKind {
    Permanent,
    Temporary(SessionId),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccessGrant {
    pub user: UserId,
    pub cell: CellId,
    pub kind: GrantKind,
    pub granted_at_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PendingRequest {
    pub user: UserId,
    pub session: SessionId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellAccess {
    pub owner: UserId,
    pub open: bool,
    pub authorized: BTreeSet<UserId>,
    pub pending: Vec<PendingRequest>,
    pub temporary: Vec<AccessGrant>,
}

impl CellAccess {
    fn permits(&self, user: UserId, t_s: f64) -> bool {
        self.open
            || user == self.owner
            || self.authorized.contains(&user)
            || self.temporary.iter().any(|g| g.user == user && g.granted_at_s <= t_s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GatewayRegistry {
    pub gateway_id: u32,
    cells: BTreeMap<CellId, CellAccess>,
}

impl GatewayRegistry {
    pub fn new(gateway_id: u32) -> Self {
        GatewayRegistry { gateway_id, cells: BTreeMap::new() }
    }

    pub fn cell(&self, cell: CellId) -> Option<&CellAccess> {
        self.cells.get(&cell)
    }

    pub fn cells(&self) -> impl Iterator<Item = (&CellId, &CellAccess)> {
        self.cells.iter()
    }

    fn get_mut(&mut self, cell: CellId) -> Result<&mut CellAccess, AuthError> {
        self.cells.get_mut(&cell).ok_or(AuthError::UnknownCell(cell))
    }

    fn owned_mut(&mut self, cell: CellId, admin: UserId) -> Result<&mut CellAccess, AuthError> {
        let c = self.get_mut(cell)?;
        if c.owner != admin {
            return Err(AuthError::PermissionDenied { cell, user: admin });
        }
        Ok(c)
    }

    pub fn register_microcell(
        &mut self,
        cell: CellId,
        owner: UserId,
        initial_users: impl IntoIterator<Item = UserId>,
    ) -> Result<(), AuthError> {
        self.insert(cell, owner, false, initial_users.into_iter().collect())
    }

    /// Operator cell: every user is authorized.
    pub fn register_open_cell(&mut self, cell: CellId) -> Result<(), AuthError> {
        self.insert(cell, OPERATOR, true, BTreeSet::new())
    }

    fn insert(&mut self, cell: CellId, owner: UserId, open: bool, mut users: BTreeSet<UserId>) -> Result<(), AuthError> {
        if self.cells.contains_key(&cell) {
            return Err(AuthError::DuplicateCell(cell));
        }
        users.insert(owner);
        self.cells.insert(cell, CellAccess { owner, open, authorized: users, pending: Vec::new(), temporary: Vec::new() });
        Ok(())
    }

    pub fn add_authorized_user(&mut self, cell: CellId, admin: UserId, user: UserId) -> Result<(), AuthError> {
        let c = self.owned_mut(cell, admin)?;
        c.authorized.insert(user);
        c.pending.retain(|p| p.user != user);
        Ok(())
    }

    pub fn check_access(&self, cell: CellId, user: UserId, t_s: f64) -> Result<bool, AuthError> {
        self.cells.get(&cell).map(|c| c.permits(user, t_s)).ok_or(AuthError::UnknownCell(cell))
    }

    pub fn has_pending(&self, cell: CellId, user: UserId) -> bool {
        self.cells.get(&cell).is_some_and(|c| c.pending.iter().any(|p| p.user == user))
    }

    pub fn request_temp_access(
        &mut self,
        cell: CellId,
        user: UserId,
        session: SessionId,
        t_s: f64,
    ) -> Result<PendingRequest, AuthError> {
        let c = self.get_mut(cell)?;
        if c.permits(user, t_s) {
            return Err(AuthError::AlreadyAuthorized { cell, user });
        }
        if c.pending.iter().any(|p| p.user == user) {
            return Err(AuthError::AlreadyPending { cell, user });
        }
        let req = PendingRequest { user, session };
        c.pending.push(req);
        Ok(req)
    }

    pub fn grant_temp_access(
        &mut self,
        cell: CellId,
        admin: UserId,
        user: UserId,
        t_s: f64,
    ) -> Result<AccessGrant, AuthError> {
        let c = self.owned_mut(cell, admin)?;
        let idx = c.pending.iter().position(|p| p.user == user).ok_or(AuthError::NoPendingRequest { cell, user })?;
        let req = c.pending.remove(idx);
        let grant = AccessGrant { user, cell, kind: GrantKind::Temporary(req.session), granted_at_s: t_s };
        c.temporary.push(grant);
        Ok(grant)
    }

    /// Drops a pending request without granting it. The user may ask again.
    pub fn deny_temp_access(&mut self, cell: CellId, admin: UserId, user: UserId) -> Result<PendingRequest, AuthError> {
        let c = self.owned_mut(cell, admin)?;
        let idx = c.pending.iter().position(|p| p.user == user).ok_or(AuthError::NoPendingRequest { cell, user })?;
        Ok(c.pending.remove(idx))
    }

    /// Expires every temporary grant and pending request tied to `session`;
    /// returns the expired grants.
    pub fn end_session(&mut self, session: SessionId) -> Vec<AccessGrant> {
        let mut expired = Vec::new();
        for c in self.cells.values_mut() {
            c.pending.retain(|p| p.session != session);
            c.temporary.retain(|g| {
                let keep = g.kind != GrantKind::Temporary(session);
                if !keep {
                    expired.push(*g);
                }
                keep
            });
        }
        expired
    }
}
