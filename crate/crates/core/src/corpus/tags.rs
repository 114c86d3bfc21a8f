use std::fmt;
use std::str::FromStr;

/// Part-of-speech tags of the 15-tag Burmese POS inventory.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PosTag {
    Abb,
    Adj,
    Adv,
    Conj,
    Fw,
    Int,
    N,
    Num,
    Part,
    Ppm,
    Pron,
    Punc,
    Sb,
    Tn,
    V,
}

impl PosTag {
    pub const ALL: [PosTag; 15] = [
        PosTag::Abb,
        PosTag::Adj,
        PosTag::Adv,
        PosTag::Conj,
        PosTag::Fw,
        PosTag::Int,
        PosTag::N,
        PosTag::Num,
        PosTag::Part,
        PosTag::Ppm,
        PosTag::Pron,
        PosTag::Punc,
        PosTag::Sb,
        PosTag::Tn,
        PosTag::V,
    ];

    pub const COUNT: usize = 15;

    pub fn as_str(self) -> &'static str {
        match self {
            PosTag::Abb => "abb",
            PosTag::Adj => "adj",
            PosTag::Adv => "adv",
            PosTag::Conj => "conj",
            PosTag::Fw => "fw",
            PosTag::Int => "int",
            PosTag::N => "n",
            PosTag::Num => "num",
            PosTag::Part => "part",
            PosTag::Ppm => "ppm",
            PosTag::Pron => "pron",
            PosTag::Punc => "punc",
            PosTag::Sb => "sb",
            PosTag::Tn => "tn",
            PosTag::V => "v",
        }
    }

    /// Dense index in `0..15`, following the order of [`PosTag::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<PosTag> {
        Self::ALL.get(index).copied()
    }
}

impl fmt::Display for PosTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PosTag {
    type Err = UnknownTag;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PosTag::ALL
            .iter()
            .copied()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| UnknownTag(s.to_string()))
    }
}

/// Entity categories.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EntityType {
    Loc,
    Date,
    Num,
    Per,
    Org,
    Time,
}

impl EntityType {
    /// Row order of the tag-count and tag-wise tables.
    pub const ALL: [EntityType; 6] = [
        EntityType::Loc,
        EntityType::Date,
        EntityType::Num,
        EntityType::Per,
        EntityType::Org,
        EntityType::Time,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EntityType::Loc => "LOC",
            EntityType::Date => "DATE",
            EntityType::Num => "NUM",
            EntityType::Per => "PER",
            EntityType::Org => "ORG",
            EntityType::Time => "TIME",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for EntityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EntityType {
    type Err = UnknownTag;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EntityType::ALL
            .iter()
            .copied()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| UnknownTag(s.to_string()))
    }
}

/// Position of a token inside an entity span.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Position {
    Begin,
    Inside,
    End,
    Single,
}

impl Position {
    pub const ALL: [Position; 4] = [
        Position::Begin,
        Position::Inside,
        Position::End,
        Position::Single,
    ];

    pub fn as_char(self) -> char {
        match self {
            Position::Begin => 'B',
            Position::Inside => 'I',
            Position::End => 'E',
            Position::Single => 'S',
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// A BIOES named-entity label: either outside (`O`) or a position inside
/// an entity of a given type (`B-LOC`, `S-PER`, ...).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NerLabel {
    Outside,
    Entity(Position, EntityType),
}

impl NerLabel {
    /// Size of the closed label inventory: 4 positions x 6 types + `O`.
    pub const COUNT: usize = 25;

    /// The full inventory in canonical index order: `O` first, then each
    /// entity type in table order with positions B, I, E, S.
    pub fn all() -> Vec<NerLabel> {
        let mut out = Vec::with_capacity(Self::COUNT);
        out.push(NerLabel::Outside);
        for ty in EntityType::ALL {
            for pos in Position::ALL {
                out.push(NerLabel::Entity(pos, ty));
            }
        }
        out
    }

    pub fn index(self) -> usize {
        match self {
            NerLabel::Outside => 0,
            NerLabel::Entity(pos, ty) => 1 + ty.index() * 4 + pos.index(),
        }
    }

    pub fn from_index(index: usize) -> Option<NerLabel> {
        match index {
            0 => Some(NerLabel::Outside),
            i if i < Self::COUNT => {
                let k = i - 1;
                Some(NerLabel::Entity(
                    Position::ALL[k % 4],
                    EntityType::ALL[k / 4],
                ))
            }
            _ => None,
        }
    }

    pub fn entity(self) -> Option<EntityType> {
        match self {
            NerLabel::Outside => None,
            NerLabel::Entity(_, ty) => Some(ty),
        }
    }

    pub fn position(self) -> Option<Position> {
        match self {
            NerLabel::Outside => None,
            NerLabel::Entity(pos, _) => Some(pos),
        }
    }

    pub fn is_outside(self) -> bool {
        self == NerLabel::Outside
    }
}

impl fmt::Display for NerLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NerLabel::Outside => f.write_str("O"),
            NerLabel::Entity(pos, ty) => write!(f, "{}-{}", pos.as_char(), ty),
        }
    }
}

impl FromStr for NerLabel {
    type Err = UnknownTag;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "O" {
            return Ok(NerLabel::Outside);
        }
        let unknown = || UnknownTag(s.to_string());
        let (pos, ty) = s.split_once('-').ok_or_else(unknown)?;
        let pos = match pos {
            "B" => Position::Begin,
            "I" => Position::Inside,
            "E" => Position::End,
            "S" => Position::Single,
            _ => return Err(unknown()),
        };
        let ty = ty.parse::<EntityType>().map_err(|_| unknown())?;
        Ok(NerLabel::Entity(pos, ty))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown tag {0:?}")]
pub struct UnknownTag(pub String);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inventory_sizes() {
        assert_eq!(PosTag::ALL.len(), 15);
        let all = NerLabel::all();
        assert_eq!(all.len(), 25);
        for (i, label) in all.iter().enumerate() {
            assert_eq!(label.index(), i);
            assert_eq!(NerLabel::from_index(i), Some(*label));
        }
        assert_eq!(NerLabel::from_index(25), None);
    }

    #[test]
    fn labels_round_trip_text() {
        for label in NerLabel::all() {
            assert_eq!(label.to_string().parse::<NerLabel>().unwrap(), label);
        }
        for pos in PosTag::ALL {
            assert_eq!(pos.as_str().parse::<PosTag>().unwrap(), pos);
            assert_eq!(PosTag::from_index(pos.index()), Some(pos));
        }
    }

    #[test]
    fn rejects_unknown() {
        for bad in ["", "o", "B-", "B-FOO", "X-LOC", "B_LOC", "b-LOC", "BLOC", "B-LOC-1"] {
            assert!(bad.parse::<NerLabel>().is_err(), "{bad}");
        }
        for bad in ["N", "noun", "", "nn"] {
            assert!(bad.parse::<PosTag>().is_err(), "{bad}");
        }
    }
}
