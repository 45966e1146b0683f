//! Seeded synthetic student records.
//!
//! The roster follows a typical student-records schema (registration data,
//! library loans, contact details, marks). Value domains are synthetic.
//! Only the marks carry structure:
//!
//! * every student has a latent ability group (1..=4); group 4 lands above
//!   90% in spring and fall;
//! * lab marks count towards `PASS_PERCENTAGE` in spring and fall only, so
//!   summer percentages sit strictly below the other semesters;
//! * `ASSIG_PARAMETER` and the averaged marks track ability.
//!
//! Descriptive columns are either identifier-like (unique per student) or
//! dominated by a single value, so they carry little grouping signal.

use super::{AttributeKind, Cell, Dataset, IngestError};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub const SEMESTERS: [&str; 3] = ["spring", "fall", "summer"];

const COLUMNS: [(&str, AttributeKind); 25] = [
    ("REG_NO", AttributeKind::Categorical),
    ("NAME", AttributeKind::Categorical),
    ("YEAR", AttributeKind::Numeric),
    ("SEMESTER", AttributeKind::Categorical),
    ("ASSIG_PARAMETER", AttributeKind::Numeric),
    ("MAX_MARK", AttributeKind::Numeric),
    ("MIN_MARK", AttributeKind::Numeric),
    ("LIB_ACCNO", AttributeKind::Categorical),
    ("ISSUE_DATE", AttributeKind::Categorical),
    ("RETURN_DATA", AttributeKind::Categorical),
    ("ACC_NO", AttributeKind::Categorical),
    ("SPECIALIZATION", AttributeKind::Categorical),
    ("STREET_NO", AttributeKind::Categorical),
    ("PLACE", AttributeKind::Categorical),
    ("COUNTRY", AttributeKind::Categorical),
    ("MODULE_CODE", AttributeKind::Categorical),
    ("TUTOR_NAME", AttributeKind::Categorical),
    ("EMAIL_ID", AttributeKind::Categorical),
    ("TEL_PHONE", AttributeKind::Categorical),
    ("SESSION", AttributeKind::Categorical),
    ("LAB_MARK", AttributeKind::Numeric),
    ("AVG_INT", AttributeKind::Numeric),
    ("AVG_EXT", AttributeKind::Numeric),
    ("AVG_TOT", AttributeKind::Numeric),
    ("PASS_PERCENTAGE", AttributeKind::Numeric),
];

/// Ability group per slot; repeats every 20 students of a semester.
const GROUP_CYCLE: [usize; 20] = [4, 1, 2, 3, 1, 2, 1, 3, 2, 4, 1, 2, 3, 1, 2, 3, 4, 1, 2, 3];
const GROUP_ABILITY: [f64; 4] = [0.35, 0.58, 0.78, 0.95];

const INTERNAL_MAX: f64 = 30.0;
const EXTERNAL_MAX: f64 = 50.0;
const LAB_MAX: f64 = 20.0;

fn pick<'a>(rng: &mut ChaCha8Rng, weighted: &[(&'a str, f64)]) -> &'a str {
    let mut u: f64 = rng.random();
    for (value, w) in weighted {
        if u < *w {
            return value;
        }
        u -= w;
    }
    weighted.last().expect("non-empty").0
}

fn round_to(v: f64, places: i32) -> f64 {
    let f = 10f64.powi(places);
    (v * f).round() / f
}

fn maybe_missing(rng: &mut ChaCha8Rng, rate: f64, cell: Cell) -> Cell {
    if rng.random::<f64>() < rate {
        Cell::Missing
    } else {
        cell
    }
}

/// Deterministic for a given `(n, seed)`.
pub fn generate_student_data(n: usize, seed: u64) -> Result<Dataset, IngestError> {
    if n < 10 {
        return Err(IngestError::InvalidCount(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ability_noise = Normal::new(0.0, 0.035).expect("valid sigma");
    let unit = Normal::new(0.0, 1.0).expect("valid sigma");
    let letters: Vec<char> = ('a'..='z').collect();

    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let semester = i % 3;
        let group = GROUP_CYCLE[(i / 3) % GROUP_CYCLE.len()];
        let ability = (GROUP_ABILITY[group - 1] + ability_noise.sample(&mut rng)).clamp(0.05, 1.0);

        let internal = (INTERNAL_MAX * ability + unit.sample(&mut rng)).clamp(0.0, INTERNAL_MAX);
        let external = (EXTERNAL_MAX * ability + 1.5 * unit.sample(&mut rng)).clamp(0.0, EXTERNAL_MAX);
        let lab_noise = 0.8 * unit.sample(&mut rng);
        let lab = if SEMESTERS[semester] == "summer" {
            0.0
        } else {
            round_to((LAB_MAX * ability + lab_noise).clamp(0.0, LAB_MAX), 1)
        };
        let pass = round_to((internal + external + lab).clamp(0.0, 100.0), 2);
        let avg_int = round_to(40.0 + 60.0 * internal / INTERNAL_MAX, 1);
        let avg_ext = round_to(35.0 + 65.0 * external / EXTERNAL_MAX, 1);
        let avg_tot = round_to((avg_int + avg_ext) / 2.0, 1);
        let assig = round_to((4.0 + 6.0 * ability + 0.4 * unit.sample(&mut rng)).clamp(0.0, 10.0), 1);

        let name: String = (0..7).map(|_| letters[rng.random_range(0..letters.len())]).collect();
        let name = format!("{}{}", name[..1].to_uppercase(), &name[1..]);
        let year = 2016 + rng.random_range(0..8);
        let issue_day = rng.random_range(0..(8 * 365)) as u32;
        let issue_minute = rng.random_range(0..(24 * 60)) as u32;
        let loan_days = rng.random_range(1..=30);
        let issue = chrono::NaiveDate::from_ymd_opt(2016, 1, 1).expect("valid date")
            + chrono::Days::new(issue_day as u64);
        let ret = issue + chrono::Days::new(loan_days);
        let time = format!("{:02}:{:02}", issue_minute / 60, issue_minute % 60);
        let specialization = pick(
            &mut rng,
            &[("Computer Applications", 0.90), ("Information Technology", 0.06), ("Data Science", 0.04)],
        );
        let place = pick(&mut rng, &[("Coimbatore", 0.90), ("Chennai", 0.04), ("Madurai", 0.03), ("Salem", 0.03)]);
        let country = pick(&mut rng, &[("India", 0.96), ("Sri Lanka", 0.02), ("Nepal", 0.02)]);
        let module = pick(&mut rng, &[("CA601", 0.93), ("CA602", 0.07)]);
        let tutor = if module == "CA601" { "Dr. Kumar" } else { "Dr. Priya" };
        let session = pick(&mut rng, &[("regular", 0.94), ("evening", 0.06)]);
        let phone = format!("+91-9{:09}", rng.random_range(0..1_000_000_000u64));
        let street = format!("{}/{}", rng.random_range(1..200), i + 1);

        let row = vec![
            Cell::Category(format!("REG{:06}", i + 1)),
            Cell::Category(format!("{name} {}", letters[i % 26].to_ascii_uppercase())),
            Cell::Number(year as f64),
            Cell::Category(SEMESTERS[semester].to_string()),
            Cell::Number(assig),
            Cell::Number(100.0),
            Cell::Number(40.0),
            Cell::Category(format!("LIB{:07}", 1_000_003 + 17 * i)),
            Cell::Category(format!("{issue} {time}")),
            Cell::Category(format!("{ret} {time}")),
            Cell::Category(format!("AC{:07}", 5_000_001 + 31 * i)),
            Cell::Category(specialization.to_string()),
            Cell::Category(street),
            maybe_missing(&mut rng, 0.03, Cell::Category(place.to_string())),
            Cell::Category(country.to_string()),
            Cell::Category(module.to_string()),
            Cell::Category(tutor.to_string()),
            maybe_missing(&mut rng, 0.02, Cell::Category(format!("{}.{}@univ.edu", name.to_lowercase(), i + 1))),
            maybe_missing(&mut rng, 0.02, Cell::Category(phone)),
            Cell::Category(session.to_string()),
            Cell::Number(lab),
            Cell::Number(avg_int),
            Cell::Number(avg_ext),
            Cell::Number(avg_tot),
            Cell::Number(pass),
        ];
        rows.push(row);
    }
    rows.shuffle(&mut rng);

    let schema: Vec<(String, AttributeKind)> = COLUMNS.iter().map(|(n, k)| (n.to_string(), *k)).collect();
    Dataset::from_rows(&schema, rows)
}

/// Planted isotropic Gaussian blobs in 2-D with unit standard deviation;
/// adjacent centers sit `separation` apart on a regular polygon. Row `i`
/// belongs to blob `i % k`. Returns columns `x`, `y` and the planted labels.
pub fn generate_blobs(n: usize, k: usize, separation: f64, seed: u64) -> Result<(Dataset, Vec<usize>), IngestError> {
    if k == 0 || n < k {
        return Err(IngestError::InvalidCount(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("valid sigma");
    let radius = if k == 1 { 0.0 } else { separation / (2.0 * (std::f64::consts::PI / k as f64).sin()) };
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % k;
        let angle = 2.0 * std::f64::consts::PI * c as f64 / k as f64;
        let x = radius * angle.cos() + unit.sample(&mut rng);
        let y = radius * angle.sin() + unit.sample(&mut rng);
        rows.push(vec![Cell::Number(x), Cell::Number(y)]);
        labels.push(c);
    }
    let schema = vec![("x".to_string(), AttributeKind::Numeric), ("y".to_string(), AttributeKind::Numeric)];
    Ok((Dataset::from_rows(&schema, rows)?, labels))
}
