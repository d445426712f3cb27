//! Class labels shared by the generator, the classifiers and the file formats.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The four F-formations in scope, in canonical (one-hot and class-list) order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Formation {
    #[serde(rename = "face-to-face")]
    FaceToFace,
    #[serde(rename = "side-by-side")]
    SideBySide,
    #[serde(rename = "l-shaped")]
    LShaped,
    #[serde(rename = "triangle")]
    Triangle,
}

impl Formation {
    pub const ALL: [Formation; 4] = [
        Formation::FaceToFace,
        Formation::SideBySide,
        Formation::LShaped,
        Formation::Triangle,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn member_count(self) -> usize {
        match self {
            Formation::Triangle => 3,
            _ => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Formation::FaceToFace => "face-to-face",
            Formation::SideBySide => "side-by-side",
            Formation::LShaped => "l-shaped",
            Formation::Triangle => "triangle",
        }
    }
}

impl fmt::Display for Formation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Formation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace('_', "-");
        match norm.as_str() {
            "face-to-face" | "facetoface" | "vis-a-vis" => Ok(Formation::FaceToFace),
            "side-by-side" | "sidebyside" => Ok(Formation::SideBySide),
            "l-shaped" | "lshaped" | "l" => Ok(Formation::LShaped),
            "triangle" | "triangular" => Ok(Formation::Triangle),
            _ => Err(Error::Input(format!("unknown formation '{s}'"))),
        }
    }
}

/// Camera/robot approach angle relative to the formation, in 30° steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "i32", into = "i32")]
pub enum ApproachAngle {
    Minus90,
    Minus60,
    Minus30,
    Zero,
    Plus30,
    Plus60,
    Plus90,
}

impl ApproachAngle {
    pub const ALL: [ApproachAngle; 7] = [
        ApproachAngle::Minus90,
        ApproachAngle::Minus60,
        ApproachAngle::Minus30,
        ApproachAngle::Zero,
        ApproachAngle::Plus30,
        ApproachAngle::Plus60,
        ApproachAngle::Plus90,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn degrees(self) -> i32 {
        self.index() as i32 * 30 - 90
    }

    pub fn from_degrees(deg: i32) -> Result<Self> {
        if deg % 30 != 0 || !(-90..=90).contains(&deg) {
            return Err(Error::Input(format!(
                "approach angle must be one of -90,-60,-30,0,30,60,90; got {deg}"
            )));
        }
        Ok(Self::ALL[((deg + 90) / 30) as usize])
    }

    pub fn radians(self) -> f64 {
        f64::from(self.degrees()).to_radians()
    }
}

impl TryFrom<i32> for ApproachAngle {
    type Error = Error;
    fn try_from(deg: i32) -> Result<Self> {
        Self::from_degrees(deg)
    }
}

impl From<ApproachAngle> for i32 {
    fn from(a: ApproachAngle) -> i32 {
        a.degrees()
    }
}

impl fmt::Display for ApproachAngle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.degrees())
    }
}

impl FromStr for ApproachAngle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let deg: i32 = s
            .trim()
            .parse()
            .map_err(|_| Error::Input(format!("approach angle '{s}' is not an integer")))?;
        Self::from_degrees(deg)
    }
}

/// One of the 28 (formation, angle) classes used by the joint classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct JointClass {
    pub formation: Formation,
    #[serde(rename = "angle_deg")]
    pub angle: ApproachAngle,
}

impl JointClass {
    pub const COUNT: usize = 28;

    pub fn encode(self) -> usize {
        self.formation.index() * ApproachAngle::ALL.len() + self.angle.index()
    }

    pub fn decode(i: usize) -> Option<Self> {
        let n = ApproachAngle::ALL.len();
        Some(JointClass {
            formation: Formation::from_index(i / n)?,
            angle: ApproachAngle::from_index(i % n)?,
        })
    }

    pub fn all() -> impl Iterator<Item = JointClass> {
        (0..Self::COUNT).filter_map(Self::decode)
    }
}

impl fmt::Display for JointClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.formation, self.angle)
    }
}

impl FromStr for JointClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (f, a) = s
            .rsplit_once(' ')
            .ok_or_else(|| Error::Input(format!("joint class '{s}' is not '<formation> <angle>'")))?;
        let deg: i32 = a
            .parse()
            .map_err(|_| Error::Input(format!("bad angle in joint class '{s}'")))?;
        Ok(JointClass {
            formation: f.parse()?,
            angle: ApproachAngle::from_degrees(deg)?,
        })
    }
}
