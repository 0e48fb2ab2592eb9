use proptest::prelude::*;

use safedrive::agent::{decode_action, format_answer};
use safedrive::eval::{idm_accel, safety_oracle, IdmParams, OracleConfig};
use safedrive::memory::{NewRecord, Outcome, VectorStore};
use safedrive::risk_assessor::{classify_risk, RiskLevel, RiskThresholds};
use safedrive::risk_field::{GridSpec, QprConvention, RiskModel};
use safedrive::scene::{DatasetTag, LaneContext, Scene};
use safedrive::{Action, VehicleClass, VehicleState};

fn vehicle() -> impl Strategy<Value = (f64, f64, f64, f64, f64, usize)> {
    (-40.0..40.0, -10.0..10.0, -3.1..3.1, 0.0..35.0, -0.3..0.3, 0usize..5)
}

fn build(id: i64, (x, y, heading, speed, steering, class): (f64, f64, f64, f64, f64, usize)) -> VehicleState {
    let class = [
        VehicleClass::Sedan,
        VehicleClass::Truck,
        VehicleClass::Bus,
        VehicleClass::Motorcycle,
        VehicleClass::Vru,
    ][class];
    VehicleState::sedan(id, x, y, heading, speed)
        .with_class(class)
        .with_steering(steering)
}

fn thresholds(a: f64, b: f64) -> RiskThresholds {
    RiskThresholds {
        t_low: a.min(b),
        t_high: a.max(b),
        sample_count: 10,
        convention: QprConvention::AreaIntegral,
        seed: None,
        source_tag: String::new(),
    }
}

fn level_rank(l: RiskLevel) -> u8 {
    match l {
        RiskLevel::Low => 0,
        RiskLevel::Medium => 1,
        RiskLevel::High => 2,
    }
}

proptest! {
    #[test]
    fn classification_is_monotone(a in 0.0..100.0f64, b in 0.0..100.0f64, q1 in 0.0..120.0f64, q2 in 0.0..120.0f64) {
        let t = thresholds(a, b);
        let (lo, hi) = (q1.min(q2), q1.max(q2));
        prop_assert!(level_rank(classify_risk(lo, &t)) <= level_rank(classify_risk(hi, &t)));
        prop_assert_eq!(classify_risk(t.t_low, &t), RiskLevel::Medium);
        prop_assert_eq!(classify_risk(t.t_high, &t), RiskLevel::Medium);
        prop_assert_eq!(classify_risk(f64::NAN, &t), RiskLevel::High);
    }

    #[test]
    fn qpr_is_non_negative_and_ignores_the_ego(ego in vehicle(), others in prop::collection::vec(vehicle(), 0..5)) {
        let model = RiskModel::default();
        let ego = build(1, ego);
        let others: Vec<VehicleState> = others.into_iter().enumerate().map(|(k, v)| build(k as i64 + 2, v)).collect();
        let grid = GridSpec::default().around(&ego);
        let r = model.qpr_total(&ego, &others, &grid);
        prop_assert!(r.total >= 0.0 && r.front >= 0.0 && r.rear >= 0.0);
        let shares: f64 = r.per_vehicle.values().map(|s| s.total()).sum();
        prop_assert!((shares - r.total).abs() <= 1e-9 * r.total.max(1.0));
        let mut with_ego = others.clone();
        with_ego.push(ego.clone());
        prop_assert_eq!(model.qpr_total(&ego, &with_ego, &grid).total, r.total);
    }

    #[test]
    fn qpr_is_invariant_under_rigid_motion(
        ego in vehicle(),
        others in prop::collection::vec(vehicle(), 1..4),
        angle in -3.1..3.1f64,
        tx in -500.0..500.0f64,
        ty in -500.0..500.0f64,
    ) {
        let model = RiskModel::default();
        let ego = build(1, ego);
        let others: Vec<VehicleState> = others.into_iter().enumerate().map(|(k, v)| build(k as i64 + 2, v)).collect();
        let grid = GridSpec::default().around(&ego);
        let (s, c) = angle.sin_cos();
        let moved = |v: &VehicleState| {
            let mut m = v.clone();
            m.x = v.x * c - v.y * s + tx;
            m.y = v.x * s + v.y * c + ty;
            m.heading = safedrive::vehicle::wrap_angle(v.heading + angle);
            m
        };
        let a = model.qpr_total(&ego, &others, &grid).total;
        let b = model
            .qpr_total(&moved(&ego), &others.iter().map(moved).collect::<Vec<_>>(), &grid.transformed(angle, tx, ty))
            .total;
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0), "{} vs {}", a, b);
    }

    #[test]
    fn idm_is_monotone(v in 0.0..40.0f64, gap in 0.5..120.0f64, dg in 0.0..50.0f64, dv in -10.0..10.0f64, ddv in 0.0..10.0f64) {
        let p = IdmParams::default();
        let a = idm_accel(v, gap, dv, &p).unwrap();
        prop_assert!(a <= p.max_accel && a >= -p.emergency_decel);
        prop_assert!(idm_accel(v, gap + dg, dv, &p).unwrap() >= a);
        prop_assert!(idm_accel(v, gap, dv + ddv, &p).unwrap() <= a);
        prop_assert!(idm_accel(v, f64::INFINITY, dv, &p).unwrap() >= a);
    }

    #[test]
    fn faster_overtaker_demands_harder_braking(gap in 8.0..40.0f64, a in 0.0..1.0f64, b in 0.0..1.0f64) {
        let scene = |overtaker_speed: f64| {
            Scene::from_states(
                VehicleState::sedan(1, 0.0, 0.0, 0.0, 25.0),
                Some(2),
                vec![(VehicleState::sedan(6, -gap, 3.5, 0.0, overtaker_speed), Some(3))],
                LaneContext::Lanes { current: 2, left: 1, right: 0 },
                "",
                DatasetTag::Highway,
            )
        };
        let (cfg, idm) = (OracleConfig::default(), IdmParams::default());
        // below this speed the overtaker is still behind the ego at the end
        // of the horizon; a faster one passes before the merge
        let limit = 25.0 + (gap - 4.5) / cfg.horizon;
        let speed = 25.0 + a * (limit - 25.0);
        let faster = speed + b * (limit - speed);
        let slow = safety_oracle(&scene(speed), Action::LaneChangeLeft, &cfg, &idm);
        let fast = safety_oracle(&scene(faster), Action::LaneChangeLeft, &cfg, &idm);
        prop_assert!(fast.induced_decel >= slow.induced_decel - 1e-9, "{:?} vs {:?}", slow, fast);
        prop_assert!(slow.safe || !fast.safe, "{:?} vs {:?}", slow, fast);
    }

    #[test]
    fn store_round_trip_and_ordering(
        vectors in prop::collection::vec(prop::collection::vec(-1.0..1.0f64, 4), 1..40),
        query in prop::collection::vec(-1.0..1.0f64, 4),
        n in 0usize..50,
    ) {
        prop_assume!(query.iter().any(|x| *x != 0.0));
        let mut store = VectorStore::new(4, "test");
        for (k, v) in vectors.iter().enumerate() {
            if v.iter().all(|x| *x == 0.0) {
                continue;
            }
            store.update(NewRecord {
                scene_text: format!("scene {k}"),
                embedding: v.clone(),
                risk_text: String::new(),
                reasoning: "r".into(),
                action: Action::ALL[k % Action::ALL.len()],
                outcome: if k % 2 == 0 { Outcome::Correct } else { Outcome::Corrected },
                reflection: (k % 2 == 1).then(|| "why".to_string()),
                created_at: k as u64,
            }).unwrap();
        }
        let mut bytes = Vec::new();
        store.write_to(&mut bytes).unwrap();
        let back = VectorStore::read_from(bytes.as_slice()).unwrap();
        prop_assert_eq!(&back, &store);

        let hits = store.retrieve_by_vector(&query, n).unwrap();
        prop_assert_eq!(hits.len(), n.min(store.len()));
        for w in hits.windows(2) {
            prop_assert!(w[0].1 > w[1].1 || (w[0].1 == w[1].1 && w[0].0.record_id < w[1].0.record_id));
        }
    }

    #[test]
    fn decoded_answers_round_trip(reasoning in "[A-Za-z ,.]{0,60}", k in 0usize..7) {
        let action = Action::ALL[k];
        let (r, a) = decode_action(&format_answer(&reasoning, action)).unwrap();
        prop_assert_eq!(a, action);
        prop_assert_eq!(r, reasoning.trim());
    }
}
