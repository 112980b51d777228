//! Acceptance run: fifteen criteria, one line each. Runs without the libtest
//! harness so the lines always reach the output.

use std::collections::BTreeSet;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use ctrlk_core::chains::{find_cancellation, fold_two_degrees, mapping_cone, standardize_cancellation};
use ctrlk_core::gen;
use ctrlk_core::geometric::{
    apply_homotopy, cellular_chains, controlled_triangular_inverse, factor_unipotent, gcompose, gradius, grestrict,
    is_inverse_pair, reduce_paths, split_by_support, validate_controlled, Controlled, GeometricMorphism,
};
use ctrlk_core::ksimplex::{fix_signs, volodin_check, SignMode};
use ctrlk_core::morphisms::{decompose_triangular, factor_elementary, invert_triangular, multiply_factors, Morphism};
use ctrlk_core::rings::{matrix_inverse_oracle, Ring, UnitKind};
use rand::seq::SliceRandom;
use rand::Rng;

// Pinned limits.
const FLOAT_SLACK: f64 = 1e-9;
const LIMIT_INVERSION: Duration = Duration::from_secs(5);
const LIMIT_FOLDING: Duration = Duration::from_secs(10);
const LIMIT_EXCISION: Duration = Duration::from_secs(10);
const LIMIT_CELLULAR: Duration = Duration::from_secs(20);

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(start: Instant, limit: Duration) -> Result<(), String> {
    let t = start.elapsed();
    ensure(t < limit, || format!("took {:.2} s, limit {} s", t.as_secs_f64(), limit.as_secs()))
}

fn rings() -> [Ring; 2] {
    [Ring::zmod(5).unwrap(), Ring::Z]
}

fn c1_triangular_inversion() -> Outcome {
    let start = Instant::now();
    let mut r = gen::rng(101);
    for i in 0..500 {
        let ring = &rings()[i % 2];
        let n = r.gen_range(1..=6);
        let t = gen::triangular(&mut r, ring, n, false);
        let d = decompose_triangular(&t.f, &t.target_order, Some(&t.source_order), UnitKind::AllUnits)
            .map_err(|e| format!("case {i}: {e}"))?;
        let g = invert_triangular(&d).map_err(|e| format!("case {i}: {e}"))?;
        let g = g.with_modules(t.f.target(), t.f.source()).map_err(|e| e.to_string())?;
        let oracle = matrix_inverse_oracle(ring, &t.f.to_dense()).map_err(|e| format!("case {i}: {e}"))?;
        ensure(g.to_dense() == oracle, || format!("case {i}: inverse differs from oracle"))?;
        decompose_triangular(&g, &t.source_order, Some(&t.target_order), UnitKind::AllUnits)
            .map_err(|e| format!("case {i}: inverse not triangular: {e}"))?;
    }
    within(start, LIMIT_INVERSION)?;
    Ok(format!("500 cases in {:.2} s", start.elapsed().as_secs_f64()))
}

fn c2_diagonal_functoriality() -> Outcome {
    let mut r = gen::rng(102);
    for i in 0..500 {
        let ring = &rings()[i % 2];
        let n = r.gen_range(1..=6);
        let (f, g) = gen::composable_pair(&mut r, ring, n);
        let u = UnitKind::AllUnits;
        let e = |x: ctrlk_core::morphisms::MorphError| format!("case {i}: {x}");
        let df = decompose_triangular(&f.f, &f.target_order, Some(&f.source_order), u).map_err(e)?;
        let dg = decompose_triangular(&g.f, &g.target_order, Some(&g.source_order), u).map_err(e)?;
        let gf = g.f.after(&f.f).map_err(e)?;
        let dgf = decompose_triangular(&gf, &g.target_order, Some(&f.source_order), u).map_err(e)?;
        ensure(dgf.diagonal == dg.diagonal.after(&df.diagonal).map_err(e)?, || format!("case {i}: diag(gf) != diag(g) diag(f)"))?;
    }
    Ok("500 pairs".into())
}

fn c3_elementary_factorization() -> Outcome {
    let mut r = gen::rng(103);
    for i in 0..300 {
        let ring = &rings()[i % 2];
        let n = r.gen_range(1..=6);
        let t = gen::triangular(&mut r, ring, n, true);
        let e = |x: ctrlk_core::morphisms::MorphError| format!("case {i}: {x}");
        let d = decompose_triangular(&t.f, &t.target_order, Some(&t.source_order), UnitKind::One).map_err(e)?;
        let (alphas, h) = factor_elementary(&d).map_err(e)?;
        ensure(multiply_factors(&alphas, &h).map_err(e)? == t.f, || format!("case {i}: product differs"))?;
        for a in 0..alphas.len() {
            for b in 0..=a {
                ensure(alphas[a].after(&alphas[b]).map_err(e)?.is_zero(), || format!("case {i}: a{a} a{b} != 0"))?;
            }
        }
    }
    Ok("300 unipotent matrices".into())
}

fn c4_cone_contraction() -> Outcome {
    let mut r = gen::rng(104);
    for i in 0..300 {
        let ring = &rings()[i % 2];
        let (c, d, f) = gen::chain_isomorphism(&mut r, ring);
        let (cone, beta) = mapping_cone(&f, &c, &d).map_err(|e| format!("case {i}: {e}"))?;
        let beta = beta.ok_or_else(|| format!("case {i}: no contraction"))?;
        for deg in cone.degrees() {
            let m = cone.module(deg);
            let a = cone.c(deg + 1).after(&beta.at(&cone, deg)).map_err(|e| e.to_string())?;
            let b = beta.at(&cone, deg - 1).after(&cone.c(deg)).map_err(|e| e.to_string())?;
            ensure(a.add(&b).map_err(|e| e.to_string())? == Morphism::identity(&m), || {
                format!("case {i}: c b + b c != 1 in degree {deg}")
            })?;
        }
    }
    Ok("300 cones".into())
}

fn c5_standardization() -> Outcome {
    let mut r = gen::rng(105);
    for i in 0..200 {
        let k = gen::cancellation_case(&mut r, &Ring::Z);
        let e = |x: ctrlk_core::chains::ChainError| format!("case {i}: {x}");
        let dec = find_cancellation(&k.complex, &k.contraction, &k.kept, &k.orders, UnitKind::PlusMinusOne).map_err(e)?;
        let s = standardize_cancellation(&k.complex, &k.contraction, &dec).map_err(e)?;
        let c = &k.complex;
        let f = |d: i64| s.f.get(&d).cloned().unwrap_or_else(|| Morphism::identity(&c.module(d)));
        for d in c.degrees() {
            let m = |x: ctrlk_core::morphisms::MorphError| format!("case {i}: {x}");
            ensure(f(d - 1).after(&s.b.c(d)).map_err(m)? == c.c(d).after(&f(d)).map_err(m)?, || {
                format!("case {i}: f b != c f in degree {d}")
            })?;
            ensure(
                f(d + 1).after(&s.beta.at(&s.b, d)).map_err(m)? == k.contraction.at(c, d).after(&f(d)).map_err(m)?,
                || format!("case {i}: f beta != xi f in degree {d}"),
            )?;
        }
    }
    Ok("200 decompositions".into())
}

fn c6_folding() -> Outcome {
    let start = Instant::now();
    let mut r = gen::rng(106);
    for i in 0..200 {
        let ring = &rings()[i % 2];
        let (c, x) = gen::contractible_complex(&mut r, ring, 6, 5, "c");
        let e = |x: ctrlk_core::chains::ChainError| format!("case {i}: {x}");
        let (f, fx) = fold_two_degrees(&c, &x).map_err(e)?;
        let b = f.c(1);
        let k = fx.at(&f, 0);
        let m = |x: ctrlk_core::morphisms::MorphError| format!("case {i}: {x}");
        ensure(b.after(&k).map_err(m)? == Morphism::identity(&f.module(0)), || format!("case {i}: b k != 1"))?;
        ensure(k.after(&b).map_err(m)? == Morphism::identity(&f.module(1)), || format!("case {i}: k b != 1"))?;
        let (c2, x2) = gen::contractible_complex(&mut r, ring, 1, 5, "t");
        ensure(fold_two_degrees(&c2, &x2).map_err(e)? == (c2.clone(), x2.clone()), || {
            format!("case {i}: two-degree input changed")
        })?;
    }
    within(start, LIMIT_FOLDING)?;
    Ok(format!("200 complexes in {:.2} s", start.elapsed().as_secs_f64()))
}

fn c7_excision() -> Outcome {
    let start = Instant::now();
    let mut r = gen::rng(107);
    for i in 0..100 {
        let n = r.gen_range(2..=30);
        let x = gen::weighted_graph(&mut r, n);
        let us = gen::subset(&mut r, x.points(), 0.5);
        let eps = 0.25 * r.gen_range(1..=12) as f64;
        let rep = x.check_excision(&us, None, eps).map_err(|e| format!("case {i}: {e}"))?;
        ensure(rep.holds, || format!("case {i}: {:?} != {:?}", rep.lhs, rep.rhs))?;
    }
    within(start, LIMIT_EXCISION)?;
    Ok(format!("100 spaces in {:.2} s", start.elapsed().as_secs_f64()))
}

fn c8_radius_laws() -> Outcome {
    let mut r = gen::rng(108);
    for i in 0..1000 {
        let (rm, f, g) = gen::geometric_pair(&mut r, &rings()[i % 2]);
        let e = |x: ctrlk_core::geometric::GeoError| format!("pair {i}: {x}");
        let gf = gcompose(&f, &g).map_err(e)?;
        let (a, b, c) = (gradius(&rm, &f).map_err(e)?, gradius(&rm, &g).map_err(e)?, gradius(&rm, &gf).map_err(e)?);
        ensure(c <= a + b + FLOAT_SLACK, || format!("pair {i}: {c} > {a} + {b}"))?;
    }
    for i in 0..300 {
        let (rm, f, h) = gen::homotopy_case(&mut r, &rings()[i % 2]);
        let e = |x: ctrlk_core::geometric::GeoError| format!("homotopy {i}: {x}");
        let eps = gradius(&rm, &f).map_err(e)? + 0.5;
        let delta = h.radius(&rm).map_err(e)? + 0.5;
        let g = apply_homotopy(&f, &h).map_err(e)?;
        let out = gradius(&rm, &g).map_err(e)?;
        ensure(out < eps + 2.0 * delta, || format!("homotopy {i}: {out} >= {eps} + 2 * {delta}"))?;
    }
    Ok("1000 pairs, 300 homotopies".into())
}

fn c9_cellular() -> Outcome {
    let start = Instant::now();
    let mut r = gen::rng(109);
    let eps = 1.0;
    for i in 0..100 {
        let dim = 2 + i % 2;
        let k = gen::simplicial(&mut r, dim, eps);
        let cc = cellular_chains(&k).map_err(|e| format!("case {i}: {e}"))?;
        let rep = &cc.report;
        ensure(rep.mesh < eps, || format!("case {i}: mesh {}", rep.mesh))?;
        ensure(rep.algebraic_square_zero, || format!("case {i}: c^2 != 0"))?;
        ensure(rep.pairing_complete, || format!("case {i}: pairing incomplete"))?;
        ensure(rep.pairing_radius < 2.0 * eps, || format!("case {i}: pairing radius {}", rep.pairing_radius))?;
        ensure(rep.boundary_radius < eps, || format!("case {i}: boundary radius {}", rep.boundary_radius))?;
    }
    within(start, LIMIT_CELLULAR)?;
    Ok(format!("100 complexes in {:.2} s", start.elapsed().as_secs_f64()))
}

fn c10_controlled_inverse() -> Outcome {
    let mut r = gen::rng(110);
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let c = gen::controlled_triangular(&mut r, &rings()[i % 2], false);
        let e = |x: ctrlk_core::geometric::GeoError| format!("case {i}: {x}");
        let g = controlled_triangular_inverse(&c.rm, &c.f, &c.order, c.eps).map_err(e)?;
        ensure(is_inverse_pair(&c.f, &g).map_err(e)?, || format!("case {i}: not inverse"))?;
        let rad = gradius(&c.rm, &g).map_err(e)?;
        ensure(rad < 3.0 * c.eps, || format!("case {i}: radius {rad} >= 3 eps"))?;
        worst = worst.max(rad / c.eps);
    }
    Ok(format!("100 morphisms, max radius {worst:.2} eps"))
}

/// Gauss-Jordan inverse mod a prime.
fn inverse_mod(m: &[Vec<i64>], p: i64) -> Option<Vec<Vec<i64>>> {
    let n = m.len();
    let pow = |mut b: i64, mut e: i64| {
        let mut acc = 1;
        b = b.rem_euclid(p);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * b % p;
            }
            b = b * b % p;
            e >>= 1;
        }
        acc
    };
    let mut a: Vec<Vec<i64>> = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r: Vec<i64> = row.iter().map(|x| x.rem_euclid(p)).collect();
            r.extend((0..n).map(|j| i64::from(i == j)));
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).find(|&r| a[r][col] != 0)?;
        a.swap(col, piv);
        let inv = pow(a[col][col], p - 2);
        for x in a[col].iter_mut() {
            *x = *x * inv % p;
        }
        for r in 0..n {
            if r != col && a[r][col] != 0 {
                let f = a[r][col];
                for j in 0..2 * n {
                    a[r][j] = (a[r][j] - f * a[col][j]).rem_euclid(p);
                }
            }
        }
    }
    Some(a.into_iter().map(|r| r[n..].to_vec()).collect())
}

fn mul_mod(a: &[Vec<i64>], b: &[Vec<i64>], p: i64) -> Vec<Vec<i64>> {
    let n = a.len();
    (0..n).map(|i| (0..n).map(|j| (0..n).map(|k| a[i][k] * b[k][j]).sum::<i64>().rem_euclid(p)).collect()).collect()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for q in permutations(n - 1) {
        for i in 0..=q.len() {
            let mut v = q.clone();
            v.insert(i, n - 1);
            out.push(v);
        }
    }
    out
}

/// Some total order makes every quotient `g_j g_i^{-1}` unipotent lower triangular.
fn volodin_brute(ms: &[Vec<Vec<i64>>], p: i64) -> bool {
    let Some(inv) = ms.iter().map(|m| inverse_mod(m, p)).collect::<Option<Vec<_>>>() else { return false };
    let k = ms[0].len();
    let mut quotients = Vec::new();
    for j in 0..ms.len() {
        for i in 0..j {
            quotients.push(mul_mod(&ms[j], &inv[i], p));
        }
    }
    if quotients.iter().any(|q| (0..k).any(|r| q[r][r] != 1)) {
        return false;
    }
    permutations(k).into_iter().any(|pos| {
        quotients.iter().all(|q| (0..k).all(|r| (0..k).all(|c| r == c || q[r][c] == 0 || pos[c] < pos[r])))
    })
}

fn c11_volodin_oracle() -> Outcome {
    let mut r = gen::rng(111);
    let mut passing = 0;
    for i in 0..1000 {
        let p: i64 = if i % 2 == 0 { 2 } else { 3 };
        let ring = Ring::zmod(p as u64).unwrap();
        let k = r.gen_range(1..=4);
        let len = r.gen_range(1..=4);
        let v = gen::volodin_sequence(&mut r, &ring, k, len);
        let ints: Vec<Vec<Vec<i64>>> = v
            .matrices
            .iter()
            .map(|m| m.iter().map(|row| row.iter().map(|x| ring.format(x).parse().unwrap()).collect()).collect())
            .collect();
        let want = volodin_brute(&ints, p);
        let got = volodin_check(&v).is_ok();
        ensure(got == want, || format!("case {i}: check {got}, brute force {want}: {ints:?}"))?;
        passing += usize::from(want);
    }
    Ok(format!("1000 sequences, {passing} triangularizable"))
}

fn c12_sign_fixing() -> Outcome {
    let mut r = gen::rng(112);
    for i in 0..200 {
        let ring = &rings()[i % 2];
        let k = r.gen_range(1..=4);
        let len = r.gen_range(1..=4);
        let v = gen::signed_loop(&mut r, ring, k, len, false);
        let fixed = fix_signs(&v, true).map_err(|e| format!("case {i}: {e}"))?;
        ensure(fixed.mode == SignMode::One, || format!("case {i}: mode not one"))?;
        volodin_check(&fixed).map_err(|e| format!("case {i}: fixed path fails: {e}"))?;
        let pos = gen::signed_loop(&mut r, ring, k, len, true);
        let same = fix_signs(&pos, true).map_err(|e| format!("case {i}: {e}"))?;
        ensure(same.matrices == pos.matrices, || format!("case {i}: positive path changed"))?;
    }
    Ok("200 paths".into())
}

fn c13_localization() -> Outcome {
    let mut r = gen::rng(113);
    for i in 0..200 {
        let c = gen::localization_case(&mut r, &rings()[i % 2]);
        let e = |x: ctrlk_core::geometric::GeoError| format!("case {i}: {x}");
        let (fy, rest) = split_by_support(&c.rm, &c.d, &c.ys).map_err(e)?;
        ensure(fy.add(&rest).map_err(e)? == c.d, || format!("case {i}: split does not recompose"))?;
        let (d1, d2) = factor_unipotent(&c.rm, &c.d, &c.order, &c.ys, c.eps).map_err(e)?;
        ensure(reduce_paths(&gcompose(&d1, &d2).map_err(e)?) == reduce_paths(&c.d), || {
            format!("case {i}: d2 d1 != d")
        })?;
        let near = c.rm.x.enlarge(&c.ys, 3.0 * c.eps).map_err(|x| x.to_string())?;
        let one = GeometricMorphism::identity(d2.source());
        for (l, p) in d2.source().locations() {
            ensure(near.contains(p) || d2.column(l) == one.column(l), || format!("case {i}: d2 moves {l} outside Y^3eps"))?;
        }
    }
    Ok("200 instances".into())
}

fn c14_iso_restriction() -> Outcome {
    let mut r = gen::rng(114);
    for i in 0..100 {
        let c = gen::epsilon_iso(&mut r, &rings()[i % 2]);
        ensure(!c.rm.x.frontier().is_empty(), || format!("case {i}: no frontier"))?;
        let mut pts = c.rm.x.points().to_vec();
        pts.shuffle(&mut r);
        let keep = r.gen_range(1..=pts.len());
        let us: BTreeSet<_> = pts.into_iter().take(keep).collect();
        let e = |x: ctrlk_core::geometric::GeoError| format!("case {i}: {x}");
        let rm = c.rm.restrict(&us).map_err(e)?;
        let f = grestrict(&c.rm, &c.f, &us).map_err(e)?;
        let inv = grestrict(&c.rm, &c.inverse, &us).map_err(e)?;
        let ha = c.h_a.restrict(&c.rm, &us).map_err(e)?;
        let hb = c.h_b.restrict(&c.rm, &us).map_err(e)?;
        let rep = validate_controlled(
            &rm,
            Controlled::Isomorphism { f: &f, inverse: Some(&inv), h_a: Some(&ha), h_b: Some(&hb) },
            c.eps,
        )
        .map_err(e)?;
        ensure(rep.ok(), || format!("case {i}: {:?}", rep.failures()))?;
    }
    Ok("100 isomorphisms".into())
}

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn ctrlk(args: &[&str]) -> Result<std::process::Output, String> {
    Command::new(env!("CARGO_BIN_EXE_ctrlk")).args(args).output().map_err(|e| e.to_string())
}

fn c15_cli_round_trip() -> Outcome {
    let tmp = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    fs::create_dir_all(&tmp).map_err(|e| e.to_string())?;
    let mut inputs: Vec<PathBuf> = fs::read_dir(golden_dir())
        .map_err(|e| e.to_string())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    inputs.sort();
    ensure(!inputs.is_empty(), || "no golden inputs".into())?;
    for p in &inputs {
        let name = p.file_name().unwrap().to_string_lossy().to_string();
        let ps = p.to_str().unwrap();
        let o = ctrlk(&["validate", ps])?;
        ensure(o.status.code() == Some(0), || format!("{name} does not validate"))?;
        let once = tmp.join(format!("{name}.1"));
        let twice = tmp.join(format!("{name}.2"));
        ctrlk(&["fmt", ps, "--output", once.to_str().unwrap()])?;
        let o = ctrlk(&["validate", once.to_str().unwrap()])?;
        ensure(o.status.code() == Some(0), || format!("formatted {name} does not validate"))?;
        ctrlk(&["fmt", once.to_str().unwrap(), "--output", twice.to_str().unwrap()])?;
        let (a, b) = (fs::read(&once).map_err(|e| e.to_string())?, fs::read(&twice).map_err(|e| e.to_string())?);
        ensure(a == b, || format!("{name} is not a fixed point of fmt"))?;
    }
    Ok(format!("{} golden documents", inputs.len()))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 15] = [
        ("triangular inversion matches the oracle", c1_triangular_inversion),
        ("diagonal part is functorial", c2_diagonal_functoriality),
        ("elementary factorization", c3_elementary_factorization),
        ("mapping cone contraction", c4_cone_contraction),
        ("standardization identities", c5_standardization),
        ("torsion folding", c6_folding),
        ("metric excision", c7_excision),
        ("radius laws", c8_radius_laws),
        ("cellular chains", c9_cellular),
        ("controlled inverse bound", c10_controlled_inverse),
        ("Volodin brute-force oracle", c11_volodin_oracle),
        ("sign fixing", c12_sign_fixing),
        ("localization factorizations", c13_localization),
        ("epsilon-iso restriction", c14_iso_restriction),
        ("CLI round trip", c15_cli_round_trip),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name} ({detail})", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} of 15 passed", 15 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
