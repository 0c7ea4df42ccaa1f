use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::journal::JournalEvent;
use super::mutation::{Insertion, Mutation};
use super::StoreError;
use crate::clock::Timestamp;
use crate::model::{
    Card, CardId, CardKind, Project, ProjectId, ReprContent, ReprKind, Representation,
};

/// Immutable project fields, fixed when the project is created.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectHeader {
    pub id: ProjectId,
    pub name: String,
    pub pinned: bool,
    pub created_at: Timestamp,
}

/// The materialized card forest of one project.
///
/// Sibling order is kept twice: as the `children` lists and as each card's
/// `order_index`. Every mutation rewrites the affected lists' indices so the
/// two always agree and stay dense.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProjectState {
    project: Project,
    cards: BTreeMap<CardId, Card>,
    children: BTreeMap<Option<CardId>, Vec<CardId>>,
    next_card_id: u64,
}

impl ProjectState {
    pub fn new(header: ProjectHeader) -> Self {
        ProjectState {
            project: Project {
                id: header.id,
                name: header.name,
                pinned: header.pinned,
                created_at: header.created_at,
                revision: 0,
            },
            cards: BTreeMap::new(),
            children: BTreeMap::new(),
            next_card_id: 1,
        }
    }

    /// Builds a state from already-validated cards. Sibling lists are
    /// ordered by `order_index`.
    pub(crate) fn from_cards(header: ProjectHeader, cards: Vec<Card>) -> Self {
        let mut state = ProjectState::new(header);
        for card in cards {
            state.next_card_id = state.next_card_id.max(card.id.0 + 1);
            state
                .children
                .entry(card.parent_id)
                .or_default()
                .push(card.id);
            state.cards.insert(card.id, card);
        }
        let cards = &state.cards;
        for list in state.children.values_mut() {
            list.sort_by_key(|id| cards[id].order_index);
        }
        state
    }

    /// Restores the counters a snapshot does not carry, for states rebuilt
    /// from a checkpoint.
    pub(crate) fn restore_counters(&mut self, revision: u64, next_card_id: u64) {
        self.project.revision = revision;
        self.next_card_id = self.next_card_id.max(next_card_id);
    }

    pub fn project(&self) -> &Project {
        &self.project
    }

    pub fn header(&self) -> ProjectHeader {
        ProjectHeader {
            id: self.project.id.clone(),
            name: self.project.name.clone(),
            pinned: self.project.pinned,
            created_at: self.project.created_at,
        }
    }

    pub fn revision(&self) -> u64 {
        self.project.revision
    }

    pub fn card(&self, id: CardId) -> Option<&Card> {
        self.cards.get(&id)
    }

    pub fn require_card(&self, id: CardId) -> Result<&Card, StoreError> {
        self.cards.get(&id).ok_or(StoreError::UnknownCard(id))
    }

    /// Ids of `parent`'s children in sibling order; `None` means the roots.
    pub fn children(&self, parent: Option<CardId>) -> &[CardId] {
        self.children.get(&parent).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn roots(&self) -> &[CardId] {
        self.children(None)
    }

    pub fn len(&self) -> usize {
        self.cards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cards.is_empty()
    }

    /// All cards in id order.
    pub fn cards(&self) -> impl Iterator<Item = &Card> {
        self.cards.values()
    }

    /// The id the next created card will receive.
    pub fn next_card_id(&self) -> CardId {
        CardId(self.next_card_id)
    }

    /// Pre-order walk of the subtree under `root` (or the whole forest),
    /// yielding each card with its depth relative to the walk's start (0).
    pub fn walk(&self, root: Option<CardId>) -> Vec<(&Card, usize)> {
        let mut out = Vec::with_capacity(self.cards.len());
        let mut stack: Vec<(CardId, usize)> = match root {
            Some(id) => vec![(id, 0)],
            None => self.roots().iter().rev().map(|&id| (id, 0)).collect(),
        };
        while let Some((id, depth)) = stack.pop() {
            let Some(card) = self.cards.get(&id) else {
                continue;
            };
            out.push((card, depth));
            stack.extend(
                self.children(Some(id))
                    .iter()
                    .rev()
                    .map(|&c| (c, depth + 1)),
            );
        }
        out
    }

    fn is_descendant_or_self(&self, candidate: CardId, ancestor: CardId) -> bool {
        let mut cursor = Some(candidate);
        while let Some(id) = cursor {
            if id == ancestor {
                return true;
            }
            cursor = self.cards.get(&id).and_then(|c| c.parent_id);
        }
        false
    }

    fn check_parent(&self, kind: CardKind, parent: Option<CardId>) -> Result<(), StoreError> {
        let Some(parent) = parent else {
            return Ok(());
        };
        let parent_card = self
            .cards
            .get(&parent)
            .ok_or(StoreError::UnknownParent(parent))?;
        if kind == CardKind::Folder && parent_card.kind != CardKind::Folder {
            return Err(StoreError::FolderInsideBundle);
        }
        Ok(())
    }

    fn check_insert_position(
        &self,
        parent: Option<CardId>,
        position: Option<usize>,
    ) -> Result<(), StoreError> {
        let len = self.children(parent).len();
        match position {
            Some(p) if p > len => Err(StoreError::PositionOutOfRange { position: p, len }),
            _ => Ok(()),
        }
    }

    fn check_new_card(
        &self,
        card: CardId,
        kind: CardKind,
        parent: Option<CardId>,
        position: Option<usize>,
    ) -> Result<(), StoreError> {
        if self.cards.contains_key(&card) {
            return Err(StoreError::DuplicateCard(card));
        }
        self.check_parent(kind, parent)?;
        self.check_insert_position(parent, position)
    }

    fn check_insertion(&self, ins: &Insertion) -> Result<(), StoreError> {
        if ins.kind == CardKind::Folder && !ins.representations.is_empty() {
            return Err(StoreError::InvalidCard(
                "folder cards carry no representations".into(),
            ));
        }
        let sorted_unique = ins
            .representations
            .windows(2)
            .all(|w| w[0].kind < w[1].kind);
        if !sorted_unique {
            return Err(StoreError::InvalidCard(
                "at most one representation per kind, in kind order".into(),
            ));
        }
        if ins.kind.is_direct_clip()
            && ins
                .provenance
                .as_ref()
                .is_some_and(|p| p.viewport_screenshot.is_some())
        {
            return Err(StoreError::InvalidCard(
                "direct clips never carry a viewport screenshot".into(),
            ));
        }
        self.check_new_card(ins.card, ins.kind, ins.parent, ins.position)
    }

    /// Validates `mutation` against the current state without changing it.
    pub fn check(&self, mutation: &Mutation) -> Result<(), StoreError> {
        match mutation {
            Mutation::CreateCard {
                card,
                kind,
                parent,
                position,
                ..
            } => self.check_new_card(*card, *kind, *parent, *position),
            Mutation::CaptureText(ins)
            | Mutation::CaptureImage(ins)
            | Mutation::CaptureBookmark(ins)
            | Mutation::CaptureRegion(ins)
            | Mutation::ImportTab(ins) => self.check_insertion(ins),
            Mutation::MoveCard {
                card,
                parent,
                position,
            } => {
                let moving = self.require_card(*card)?;
                if let Some(target) = parent {
                    if !self.cards.contains_key(target) {
                        return Err(StoreError::UnknownParent(*target));
                    }
                    if self.is_descendant_or_self(*target, *card) {
                        return Err(StoreError::CycleRejected);
                    }
                }
                self.check_parent(moving.kind, *parent)?;
                let mut len = self.children(*parent).len();
                if moving.parent_id == *parent {
                    len -= 1;
                }
                if *position > len {
                    return Err(StoreError::PositionOutOfRange {
                        position: *position,
                        len,
                    });
                }
                Ok(())
            }
            Mutation::ReorderCard { card, position } => {
                let parent = self.require_card(*card)?.parent_id;
                let len = self.children(parent).len();
                if *position >= len {
                    return Err(StoreError::PositionOutOfRange {
                        position: *position,
                        len,
                    });
                }
                Ok(())
            }
            Mutation::SetAnnotation { card, .. }
            | Mutation::SetColor { card, .. }
            | Mutation::SetCollapsed { card, .. }
            | Mutation::DeleteCard { card } => self.require_card(*card).map(drop),
            Mutation::SetPinned { .. } => Ok(()),
            Mutation::AttachRecognizedText { card, .. } => {
                let card = self.require_card(*card)?;
                if !matches!(
                    card.representation(ReprKind::RegionImage),
                    Some(ReprContent::Asset(_))
                ) {
                    return Err(StoreError::NoImage(card.id));
                }
                if card.representation(ReprKind::ExtractedText).is_some() {
                    return Err(StoreError::AlreadyHasText(card.id));
                }
                Ok(())
            }
        }
    }

    fn redensify(&mut self, parent: Option<CardId>) {
        if let Some(list) = self.children.get(&parent) {
            for (index, id) in list.iter().enumerate() {
                if let Some(card) = self.cards.get_mut(id) {
                    card.order_index = index;
                }
            }
        }
    }

    fn place(&mut self, card: CardId, parent: Option<CardId>, position: Option<usize>) {
        let list = self.children.entry(parent).or_default();
        let position = position.unwrap_or(list.len()).min(list.len());
        list.insert(position, card);
        self.redensify(parent);
    }

    fn unlink(&mut self, card: CardId, parent: Option<CardId>) {
        if let Some(list) = self.children.get_mut(&parent) {
            list.retain(|&c| c != card);
            if list.is_empty() {
                self.children.remove(&parent);
            }
        }
        self.redensify(parent);
    }

    fn touch(&mut self, card: CardId, at: Timestamp) -> &mut Card {
        let card = self.cards.get_mut(&card).expect("checked before apply");
        card.updated_at = at;
        card
    }

    fn insert_new(&mut self, card: Card, position: Option<usize>) {
        let (id, parent) = (card.id, card.parent_id);
        self.next_card_id = self.next_card_id.max(id.0 + 1);
        self.cards.insert(id, card);
        self.place(id, parent, position);
    }

    /// Applies a mutation that already passed [`ProjectState::check`].
    fn apply_checked(&mut self, mutation: &Mutation, at: Timestamp) {
        match mutation {
            Mutation::CreateCard {
                card,
                kind,
                title,
                parent,
                position,
            } => {
                let new = Card {
                    id: *card,
                    parent_id: *parent,
                    kind: *kind,
                    title: title.clone(),
                    annotation: String::new(),
                    color: None,
                    order_index: 0,
                    collapsed: false,
                    representations: Vec::new(),
                    provenance: None,
                    created_at: at,
                    updated_at: at,
                };
                self.insert_new(new, *position);
            }
            Mutation::CaptureText(ins)
            | Mutation::CaptureImage(ins)
            | Mutation::CaptureBookmark(ins)
            | Mutation::CaptureRegion(ins)
            | Mutation::ImportTab(ins) => {
                let new = Card {
                    id: ins.card,
                    parent_id: ins.parent,
                    kind: ins.kind,
                    title: ins.title.clone(),
                    annotation: String::new(),
                    color: None,
                    order_index: 0,
                    collapsed: false,
                    representations: ins.representations.clone(),
                    provenance: ins.provenance.clone(),
                    created_at: at,
                    updated_at: at,
                };
                self.insert_new(new, ins.position);
            }
            Mutation::MoveCard {
                card,
                parent,
                position,
            } => {
                let old_parent = self.cards[card].parent_id;
                self.unlink(*card, old_parent);
                self.touch(*card, at).parent_id = *parent;
                self.place(*card, *parent, Some(*position));
            }
            Mutation::ReorderCard { card, position } => {
                let parent = self.cards[card].parent_id;
                self.unlink(*card, parent);
                self.touch(*card, at);
                self.place(*card, parent, Some(*position));
            }
            Mutation::SetAnnotation { card, text } => {
                self.touch(*card, at).annotation = text.clone();
            }
            Mutation::SetColor { card, color } => {
                self.touch(*card, at).color = *color;
            }
            Mutation::SetCollapsed { card, collapsed } => {
                self.touch(*card, at).collapsed = *collapsed;
            }
            Mutation::DeleteCard { card } => {
                let parent = self.cards[card].parent_id;
                let doomed: Vec<CardId> =
                    self.walk(Some(*card)).iter().map(|(c, _)| c.id).collect();
                for id in &doomed {
                    self.cards.remove(id);
                    self.children.remove(&Some(*id));
                }
                self.unlink(*card, parent);
            }
            Mutation::SetPinned { pinned } => {
                self.project.pinned = *pinned;
            }
            Mutation::AttachRecognizedText { card, text } => {
                self.touch(*card, at)
                    .set_representation(Representation::text(
                        ReprKind::ExtractedText,
                        text.clone(),
                    ));
            }
        }
        self.project.revision += 1;
    }

    /// Validates and applies one mutation, returning its journal event.
    pub fn apply(
        &mut self,
        mutation: &Mutation,
        at: Timestamp,
    ) -> Result<JournalEvent, StoreError> {
        self.check(mutation)?;
        self.apply_checked(mutation, at);
        Ok(JournalEvent::new(self.project.revision, mutation, at))
    }

    /// Commits a batch atomically: either every mutation applies and
    /// `persist` accepts the resulting events, or the state is untouched.
    pub fn commit<E>(
        &mut self,
        batch: &[Mutation],
        at: Timestamp,
        persist: impl FnOnce(&[JournalEvent]) -> Result<(), E>,
    ) -> Result<Vec<JournalEvent>, CommitError<E>> {
        match batch {
            [] => Ok(Vec::new()),
            [single] => {
                self.check(single).map_err(CommitError::Store)?;
                let event = JournalEvent::new(self.project.revision + 1, single, at);
                persist(std::slice::from_ref(&event)).map_err(CommitError::Persist)?;
                self.apply_checked(single, at);
                Ok(vec![event])
            }
            _ => {
                let mut scratch = self.clone();
                let events = batch
                    .iter()
                    .map(|m| scratch.apply(m, at))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(CommitError::Store)?;
                persist(&events).map_err(CommitError::Persist)?;
                *self = scratch;
                Ok(events)
            }
        }
    }
}

#[derive(Debug)]
pub enum CommitError<E> {
    Store(StoreError),
    Persist(E),
}
