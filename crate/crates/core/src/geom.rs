//! Points, landmark sets and bounding boxes shared by every stage.
//! Coordinate origin is the top-left pixel, x rightward, y downward.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// The semantic role a landmark set plays; fixes which names must be present.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LandmarkRole {
    /// nose_left, nose_right
    Nose,
    /// coin_left, coin_right
    Coin,
    /// eye_left, eye_right, nose_tip
    Anchors,
}

impl LandmarkRole {
    pub fn required_names(&self) -> &'static [&'static str] {
        match self {
            LandmarkRole::Nose => &["nose_left", "nose_right"],
            LandmarkRole::Coin => &["coin_left", "coin_right"],
            LandmarkRole::Anchors => &["eye_left", "eye_right", "nose_tip"],
        }
    }

    /// Left/right ordered pair names for roles measured as a width.
    pub fn pair(&self) -> Option<(&'static str, &'static str)> {
        match self {
            LandmarkRole::Nose => Some(("nose_left", "nose_right")),
            LandmarkRole::Coin => Some(("coin_left", "coin_right")),
            LandmarkRole::Anchors => None,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "nose" => Ok(LandmarkRole::Nose),
            "coin" => Ok(LandmarkRole::Coin),
            "anchors" => Ok(LandmarkRole::Anchors),
            other => Err(Error::InvalidArgument(format!("unknown landmark role '{other}'"))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            LandmarkRole::Nose => "nose",
            LandmarkRole::Coin => "coin",
            LandmarkRole::Anchors => "anchors",
        }
    }
}

/// Named 2-D points in image pixel coordinates.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct LandmarkSet {
    points: BTreeMap<String, Point2>,
}

impl LandmarkSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, p: Point2) {
        self.points.insert(name.to_string(), p);
    }

    pub fn get(&self, name: &str) -> Option<Point2> {
        self.points.get(name).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Point2)> {
        self.points.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Check required names for `role` are present, finite, and (for width
    /// pairs) ordered left.x <= right.x.
    pub fn validate(&self, role: LandmarkRole) -> Result<()> {
        for name in role.required_names() {
            let p = self
                .get(name)
                .ok_or_else(|| Error::InvalidArgument(format!("missing landmark '{name}'")))?;
            if !p.is_finite() {
                return Err(Error::InvalidArgument(format!("non-finite landmark '{name}'")));
            }
        }
        if let Some((left, right)) = role.pair() {
            let l = self.get(left).unwrap();
            let r = self.get(right).unwrap();
            if l.x > r.x {
                return Err(Error::InvalidArgument(format!(
                    "{left}.x ({}) > {right}.x ({})",
                    l.x, r.x
                )));
            }
        }
        Ok(())
    }

    /// The ordered width pair for a nose/coin role.
    pub fn width_pair(&self, role: LandmarkRole) -> Result<(Point2, Point2)> {
        let (l, r) = role
            .pair()
            .ok_or_else(|| Error::InvalidArgument(format!("role {} has no width pair", role.as_str())))?;
        self.validate(role)?;
        Ok((self.get(l).unwrap(), self.get(r).unwrap()))
    }
}

impl FromIterator<(String, Point2)> for LandmarkSet {
    fn from_iter<T: IntoIterator<Item = (String, Point2)>>(iter: T) -> Self {
        LandmarkSet {
            points: iter.into_iter().collect(),
        }
    }
}

/// Axis-aligned box in pixel coordinates, float so pyramid rescaling is exact.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        BBox { x, y, w, h }
    }

    pub fn area(&self) -> f64 {
        self.w.max(0.0) * self.h.max(0.0)
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn center(&self) -> Point2 {
        Point2::new(self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn contains_point(&self, p: Point2) -> bool {
        p.x >= self.x && p.x < self.right() && p.y >= self.y && p.y < self.bottom()
    }

    pub fn contains_box(&self, other: &BBox) -> bool {
        other.x >= self.x
            && other.y >= self.y
            && other.right() <= self.right()
            && other.bottom() <= self.bottom()
    }

    pub fn intersect(&self, other: &BBox) -> Option<BBox> {
        let x = self.x.max(other.x);
        let y = self.y.max(other.y);
        let r = self.right().min(other.right());
        let b = self.bottom().min(other.bottom());
        if r > x && b > y {
            Some(BBox::new(x, y, r - x, b - y))
        } else {
            None
        }
    }

    /// Clip to image bounds, returning integer pixel crop coordinates.
    /// None when the box lies fully outside the image.
    pub fn clip_to_image(&self, width: u32, height: u32) -> Option<(u32, u32, u32, u32)> {
        let image = BBox::new(0.0, 0.0, width as f64, height as f64);
        let i = self.intersect(&image)?;
        let x0 = i.x.floor() as u32;
        let y0 = i.y.floor() as u32;
        let x1 = (i.right().ceil() as u32).min(width);
        let y1 = (i.bottom().ceil() as u32).min(height);
        if x1 > x0 && y1 > y0 {
            Some((x0, y0, x1 - x0, y1 - y0))
        } else {
            None
        }
    }

    pub fn scaled(&self, factor: f64) -> BBox {
        BBox::new(self.x * factor, self.y * factor, self.w * factor, self.h * factor)
    }
}

/// Intersection-over-union of two boxes, in [0, 1].
pub fn bbox_iou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersect(b).map_or(0.0, |i| i.area());
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn iou_identity() {
        let a = BBox::new(0.0, 0.0, 10.0, 10.0);
        assert_relative_eq!(bbox_iou(&a, &a), 1.0);
    }

    #[test]
    fn iou_disjoint() {
        let a = BBox::new(0.0, 0.0, 10.0, 10.0);
        let b = BBox::new(10.0, 10.0, 5.0, 5.0);
        assert_relative_eq!(bbox_iou(&a, &b), 0.0);
    }

    #[test]
    fn iou_half_overlap() {
        // hand arithmetic: inter 5x10=50, union 100+100-50=150
        let a = BBox::new(0.0, 0.0, 10.0, 10.0);
        let b = BBox::new(5.0, 0.0, 10.0, 10.0);
        assert_relative_eq!(bbox_iou(&a, &b), 50.0 / 150.0, epsilon = 1e-12);
        assert_relative_eq!(bbox_iou(&b, &a), bbox_iou(&a, &b));
    }

    #[test]
    fn landmark_role_validation() {
        let mut lm = LandmarkSet::new();
        lm.insert("nose_left", Point2::new(10.0, 5.0));
        assert!(lm.validate(LandmarkRole::Nose).is_err());
        lm.insert("nose_right", Point2::new(20.0, 5.0));
        assert!(lm.validate(LandmarkRole::Nose).is_ok());
        lm.insert("nose_right", Point2::new(5.0, 5.0));
        assert!(lm.validate(LandmarkRole::Nose).is_err());
    }

    #[test]
    fn clip_half_outside() {
        let b = BBox::new(-5.0, 0.0, 10.0, 10.0);
        assert_eq!(b.clip_to_image(100, 100), Some((0, 0, 5, 10)));
        let outside = BBox::new(200.0, 200.0, 10.0, 10.0);
        assert_eq!(outside.clip_to_image(100, 100), None);
    }
}
