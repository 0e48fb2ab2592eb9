use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SceneError;
use crate::vehicle::{VehicleClass, VehicleState};

/// Speed below which the heading is carried forward instead of being taken
/// from the velocity direction.
pub const HEADING_MIN_SPEED: f64 = 0.1;

/// One (frame, track) observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackRow {
    pub frame: u32,
    pub id: i64,
    pub x: f64,
    pub y: f64,
    pub width: f64,
    /// Extent along the direction of travel.
    pub length: f64,
    pub x_velocity: f64,
    pub y_velocity: f64,
    pub lane_id: Option<i32>,
    pub class: VehicleClass,
    pub yaw_rate: Option<f64>,
    /// Explicit heading in radians, when the source provides one.
    pub heading: Option<f64>,
}

impl TrackRow {
    pub fn speed(&self) -> f64 {
        self.x_velocity.hypot(self.y_velocity)
    }
}

/// Trajectories of all road users in one recording, sorted by
/// `(frame, id)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryTable {
    rows: Vec<TrackRow>,
    headings: Vec<f64>,
    frame_rate: f64,
    pub metadata: BTreeMap<String, String>,
    frames: BTreeMap<u32, (usize, usize)>,
    tracks: BTreeMap<i64, Vec<usize>>,
}

impl TrajectoryTable {
    pub fn from_rows(mut rows: Vec<TrackRow>, frame_rate: f64) -> Result<Self, SceneError> {
        if !(frame_rate.is_finite() && frame_rate > 0.0) {
            return Err(SceneError::BadParameter(format!(
                "frame_rate must be positive, got {frame_rate}"
            )));
        }
        rows.sort_by_key(|r| (r.frame, r.id));
        for pair in rows.windows(2) {
            if pair[0].frame == pair[1].frame && pair[0].id == pair[1].id {
                return Err(SceneError::DuplicateKey {
                    frame: pair[0].frame,
                    id: pair[0].id,
                });
            }
        }
        let mut frames = BTreeMap::new();
        let mut tracks: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
        let mut start = 0;
        for (i, row) in rows.iter().enumerate() {
            if i > 0 && rows[i - 1].frame != row.frame {
                frames.insert(rows[i - 1].frame, (start, i));
                start = i;
            }
            tracks.entry(row.id).or_default().push(i);
        }
        if let Some(last) = rows.last() {
            frames.insert(last.frame, (start, rows.len()));
        }

        let mut headings = vec![0.0; rows.len()];
        for indices in tracks.values() {
            let mut previous: Option<f64> = None;
            for &i in indices {
                let row = &rows[i];
                let h = match row.heading {
                    Some(h) => h,
                    None if row.speed() > HEADING_MIN_SPEED => row.y_velocity.atan2(row.x_velocity),
                    None => previous.unwrap_or(0.0),
                };
                headings[i] = h;
                previous = Some(h);
            }
        }

        Ok(TrajectoryTable {
            rows,
            headings,
            frame_rate,
            metadata: BTreeMap::new(),
            frames,
            tracks,
        })
    }

    pub fn frame_rate(&self) -> f64 {
        self.frame_rate
    }

    pub fn rows(&self) -> &[TrackRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn frames(&self) -> impl Iterator<Item = u32> + '_ {
        self.frames.keys().copied()
    }

    pub fn track_ids(&self) -> impl Iterator<Item = i64> + '_ {
        self.tracks.keys().copied()
    }

    /// Row indices of all observations at `frame`.
    pub fn frame_range(&self, frame: u32) -> Option<std::ops::Range<usize>> {
        self.frames.get(&frame).map(|&(a, b)| a..b)
    }

    pub fn rows_at(&self, frame: u32) -> &[TrackRow] {
        self.frame_range(frame).map_or(&[], |r| &self.rows[r])
    }

    pub fn find(&self, frame: u32, id: i64) -> Option<usize> {
        let range = self.frame_range(frame)?;
        let slice = &self.rows[range.clone()];
        slice
            .binary_search_by_key(&id, |r| r.id)
            .ok()
            .map(|k| range.start + k)
    }

    /// Row indices of one track in frame order.
    pub fn track(&self, id: i64) -> &[usize] {
        self.tracks.get(&id).map_or(&[], Vec::as_slice)
    }

    pub fn row(&self, index: usize) -> &TrackRow {
        &self.rows[index]
    }

    /// Heading of a row: explicit, from velocity, or carried forward.
    pub fn heading(&self, index: usize) -> f64 {
        self.headings[index]
    }

    /// Vehicle state of a row. Steering comes from the yaw rate through the
    /// kinematic relation `tan(delta) = L * yaw_rate / v`, or zero.
    pub fn state(&self, index: usize, wheelbase_ratio: f64) -> VehicleState {
        let row = &self.rows[index];
        let speed = row.speed();
        let wheelbase = (row.length * wheelbase_ratio).max(1e-3);
        let steering = match row.yaw_rate {
            Some(rate) if speed > HEADING_MIN_SPEED => {
                let limit = std::f64::consts::FRAC_PI_2 - 1e-3;
                (wheelbase * rate / speed).atan().clamp(-limit, limit)
            }
            _ => 0.0,
        };
        VehicleState {
            id: row.id,
            class: row.class,
            x: row.x,
            y: row.y,
            heading: crate::vehicle::wrap_angle(self.headings[index]),
            speed,
            steering,
            width: row.width,
            length: row.length,
            wheelbase,
        }
    }
}

/// Options for reading trajectory CSVs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParseOptions {
    pub frame_rate: f64,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions { frame_rate: 25.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Column {
    Frame,
    Id,
    X,
    Y,
    Width,
    Length,
    XVelocity,
    YVelocity,
    LaneId,
    Class,
    YawRate,
    HeadingRad,
    HeadingDeg,
}

const REQUIRED: [(Column, &str); 8] = [
    (Column::Frame, "frame"),
    (Column::Id, "id"),
    (Column::X, "x"),
    (Column::Y, "y"),
    (Column::Width, "width"),
    (Column::Length, "height"),
    (Column::XVelocity, "xVelocity"),
    (Column::YVelocity, "yVelocity"),
];

fn column_for(header: &str) -> Option<Column> {
    let key: String = header
        .trim()
        .chars()
        .filter(|c| *c != '_')
        .flat_map(char::to_lowercase)
        .collect();
    Some(match key.as_str() {
        "frame" | "frameid" => Column::Frame,
        "id" | "trackid" => Column::Id,
        "x" | "xcenter" => Column::X,
        "y" | "ycenter" => Column::Y,
        "width" => Column::Width,
        "height" | "length" => Column::Length,
        "xvelocity" => Column::XVelocity,
        "yvelocity" => Column::YVelocity,
        "laneid" => Column::LaneId,
        "class" | "vehicleclass" => Column::Class,
        "yawrate" => Column::YawRate,
        "headingrad" => Column::HeadingRad,
        // inD / rounD store heading in degrees
        "heading" => Column::HeadingDeg,
        _ => return None,
    })
}

pub fn parse_tracks(path: impl AsRef<Path>) -> Result<TrajectoryTable, SceneError> {
    let file = std::fs::File::open(path.as_ref())?;
    parse_tracks_from(file, ParseOptions::default())
}

/// Reads a highD-style CSV. Header names are matched case-insensitively
/// with aliases; unknown columns are ignored.
pub fn parse_tracks_from<R: Read>(reader: R, options: ParseOptions) -> Result<TrajectoryTable, SceneError> {
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = csv.headers()?.clone();
    let mut slots: BTreeMap<u8, usize> = BTreeMap::new();
    for (i, h) in headers.iter().enumerate() {
        if let Some(col) = column_for(h) {
            slots.entry(col as u8).or_insert(i);
        }
    }
    for (col, name) in REQUIRED {
        if !slots.contains_key(&(col as u8)) {
            return Err(SceneError::MissingColumn(name.to_string()));
        }
    }
    let slot = |c: Column| slots.get(&(c as u8)).copied();

    let mut rows = Vec::new();
    for record in csv.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let malformed = |reason: String| SceneError::MalformedRow { line, reason };
        let field = |c: Column| -> Option<&str> {
            slot(c).and_then(|i| record.get(i)).filter(|s| !s.is_empty())
        };
        let number = |c: Column| -> Result<f64, SceneError> {
            let text = field(c).ok_or_else(|| malformed(format!("empty {c:?}")))?;
            let v: f64 = text
                .parse()
                .map_err(|_| malformed(format!("{c:?}: not a number: {text:?}")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(malformed(format!("{c:?}: not finite")))
            }
        };
        let optional = |c: Column| -> Result<Option<f64>, SceneError> {
            match field(c) {
                None => Ok(None),
                Some(_) => number(c).map(Some),
            }
        };
        let frame = number(Column::Frame)?;
        if frame < 0.0 || frame.fract() != 0.0 || frame > f64::from(u32::MAX) {
            return Err(malformed(format!("frame must be a non-negative integer, got {frame}")));
        }
        let id = number(Column::Id)?;
        if id.fract() != 0.0 {
            return Err(malformed(format!("id must be an integer, got {id}")));
        }
        let lane_id = match optional(Column::LaneId)? {
            Some(l) if l.fract() == 0.0 => Some(l as i32),
            Some(l) => return Err(malformed(format!("laneId must be an integer, got {l}"))),
            None => None,
        };
        let width = number(Column::Width)?;
        let length = number(Column::Length)?;
        if width <= 0.0 || length <= 0.0 {
            return Err(malformed("width and length must be positive".into()));
        }
        let heading = match optional(Column::HeadingRad)? {
            Some(h) => Some(h),
            None => optional(Column::HeadingDeg)?.map(f64::to_radians),
        };
        rows.push(TrackRow {
            frame: frame as u32,
            id: id as i64,
            x: number(Column::X)?,
            y: number(Column::Y)?,
            width,
            length,
            x_velocity: number(Column::XVelocity)?,
            y_velocity: number(Column::YVelocity)?,
            lane_id,
            class: field(Column::Class).map_or(VehicleClass::Other, |s| s.parse().unwrap()),
            yaw_rate: optional(Column::YawRate)?,
            heading,
        });
    }
    TrajectoryTable::from_rows(rows, options.frame_rate)
}

/// Writes the canonical CSV form read back by [`parse_tracks_from`].
pub fn write_tracks<W: Write>(table: &TrajectoryTable, writer: W) -> Result<(), SceneError> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record([
        "frame",
        "id",
        "x",
        "y",
        "width",
        "height",
        "xVelocity",
        "yVelocity",
        "laneId",
        "class",
        "yawRate",
        "headingRad",
    ])?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in table.rows() {
        out.write_record([
            r.frame.to_string(),
            r.id.to_string(),
            r.x.to_string(),
            r.y.to_string(),
            r.width.to_string(),
            r.length.to_string(),
            r.x_velocity.to_string(),
            r.y_velocity.to_string(),
            r.lane_id.map(|l| l.to_string()).unwrap_or_default(),
            r.class.as_str().to_string(),
            opt(r.yaw_rate),
            opt(r.heading),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<TrajectoryTable, SceneError> {
        parse_tracks_from(text.as_bytes(), ParseOptions::default())
    }

    #[test]
    fn two_row_file() {
        let t = parse(
            "frame,id,x,y,width,height,xVelocity,yVelocity,laneId\n\
             1,7,10.0,2.0,1.8,4.5,3.0,4.0,2\n\
             2,7,10.12,2.16,1.8,4.5,6.0,8.0,2\n",
        )
        .unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.row(0).speed(), 5.0);
        assert_eq!(t.row(1).speed(), 10.0);
        assert_eq!(t.row(0).lane_id, Some(2));
        assert!((t.heading(0) - 4f64.atan2(3.0)).abs() < 1e-15);
    }

    #[test]
    fn missing_id_column() {
        let err = parse("frame,x,y,width,height,xVelocity,yVelocity\n1,0,0,1,1,0,0\n").unwrap_err();
        assert!(matches!(err, SceneError::MissingColumn(ref c) if c == "id"), "{err}");
    }

    #[test]
    fn aliases_and_unknown_columns() {
        let t = parse(
            "frameId,trackId,xCenter,yCenter,width,length,xVelocity,yVelocity,lane_id,vehicleClass,yaw_rate,extra\n\
             0,3,1,2,2,5,1,0,,Truck,0.1,foo\n",
        )
        .unwrap();
        let r = t.row(0);
        assert_eq!((r.id, r.length, r.class), (3, 5.0, VehicleClass::Truck));
        assert_eq!(r.lane_id, None);
        assert_eq!(r.yaw_rate, Some(0.1));
    }

    #[test]
    fn stationary_heading_carries_forward() {
        let t = parse(
            "frame,id,x,y,width,height,xVelocity,yVelocity\n\
             0,1,0,0,2,4,0,5\n\
             1,1,0,0.2,2,4,0,0\n\
             2,1,0,0.2,2,4,0.01,0\n",
        )
        .unwrap();
        let half_pi = std::f64::consts::FRAC_PI_2;
        assert_eq!(t.heading(0), half_pi);
        assert_eq!(t.heading(1), half_pi);
        assert_eq!(t.heading(2), half_pi);
    }

    #[test]
    fn first_frame_stationary_defaults_to_zero() {
        let t = parse("frame,id,x,y,width,height,xVelocity,yVelocity\n0,1,0,0,2,4,0,0\n").unwrap();
        assert_eq!(t.heading(0), 0.0);
    }

    #[test]
    fn duplicate_key() {
        let err = parse(
            "frame,id,x,y,width,height,xVelocity,yVelocity\n0,1,0,0,2,4,0,0\n0,1,1,0,2,4,0,0\n",
        )
        .unwrap_err();
        assert!(matches!(err, SceneError::DuplicateKey { frame: 0, id: 1 }));
    }

    #[test]
    fn malformed_row_reports_line() {
        let err = parse(
            "frame,id,x,y,width,height,xVelocity,yVelocity\n0,1,0,0,2,4,0,0\n1,1,abc,0,2,4,0,0\n",
        )
        .unwrap_err();
        assert!(matches!(err, SceneError::MalformedRow { line: 3, .. }), "{err}");
    }

    #[test]
    fn degree_heading_column() {
        let t = parse("frame,id,x,y,width,length,xVelocity,yVelocity,heading\n0,1,0,0,2,4,0,0,90\n").unwrap();
        assert!((t.heading(0) - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn lookup_helpers() {
        let t = parse(
            "frame,id,x,y,width,height,xVelocity,yVelocity\n\
             1,2,0,0,2,4,1,0\n0,5,0,0,2,4,1,0\n0,2,0,0,2,4,1,0\n",
        )
        .unwrap();
        assert_eq!(t.frames().collect::<Vec<_>>(), vec![0, 1]);
        assert_eq!(t.rows_at(0).len(), 2);
        assert_eq!(t.find(0, 5), Some(1));
        assert_eq!(t.find(1, 5), None);
        assert_eq!(t.track(2).len(), 2);
    }

    #[test]
    fn steering_from_yaw_rate() {
        let t = parse(
            "frame,id,x,y,width,height,xVelocity,yVelocity,yawRate\n0,1,0,0,2,5,10,0,0.4\n",
        )
        .unwrap();
        let s = t.state(0, 0.6);
        assert_eq!(s.wheelbase, 3.0);
        assert!((s.steering - (3.0f64 * 0.4 / 10.0).atan()).abs() < 1e-15);
    }
}
