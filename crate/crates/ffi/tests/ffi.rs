use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use landopt::dataset::synth::{synth_generate, SynthConfig};
use landopt::evolution::evaluate_candidate;
use landopt::land::CellContext;
use landopt::predictors::{fit_linreg, ElucModel, FeatureSchema, Predictor};
use landopt::prescriptor::{prescribe, Genome, PrescriptorFile, AREA_SCALE, GENOME_LEN};
use landopt::ActionDelta;
use landopt_ffi::*;

struct Fixture {
    _dir: tempfile::TempDir,
    predictor_path: PathBuf,
    prescriptor_path: PathBuf,
    predictor: Predictor,
    prescriptor: PrescriptorFile,
    contexts: Vec<CellContext>,
}

fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let ds = synth_generate(&SynthConfig {
        seed: 3,
        n_cells: 60,
        ..SynthConfig::default()
    })
    .unwrap();
    let predictor = Predictor::Linreg(fit_linreg(&ds, FeatureSchema::full()).unwrap());
    let predictor_path = dir.path().join("linreg.json");
    predictor.save(&predictor_path).unwrap();

    let genome = Genome((0..GENOME_LEN).map(|i| (i as f64 * 0.7).sin()).collect());
    let prescriptor = PrescriptorFile {
        prescriptor_id: "p-7".into(),
        run_id: "run".into(),
        generation: 0,
        eluc_mean: None,
        change_mean: None,
        area_scale: AREA_SCALE,
        genome,
    };
    let prescriptor_path = dir.path().join("p-7.json");
    prescriptor.save(&prescriptor_path).unwrap();

    Fixture {
        predictor_path,
        prescriptor_path,
        predictor,
        prescriptor,
        contexts: ds.latest_per_cell(),
        _dir: dir,
    }
}

fn c_path(p: &Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

fn c_context(ctx: &CellContext) -> LandoptContext {
    LandoptContext {
        lat: ctx.lat,
        lon: ctx.lon,
        area: ctx.area,
        year: ctx.year,
        fractions: ctx.usage.fractions,
        nonland: ctx.usage.nonland,
    }
}

fn last_error() -> Option<String> {
    let p = landopt_last_error();
    (!p.is_null()).then(|| unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_owned())
}

unsafe fn load_predictor(path: &Path) -> *mut LandoptPredictor {
    let mut out = ptr::null_mut();
    assert_eq!(
        landopt_predictor_load(c_path(path).as_ptr(), &mut out),
        LandoptStatus::Ok
    );
    out
}

unsafe fn load_prescriptor(path: &Path) -> *mut LandoptPrescriptor {
    let mut out = ptr::null_mut();
    assert_eq!(
        landopt_prescriptor_load(c_path(path).as_ptr(), &mut out),
        LandoptStatus::Ok
    );
    out
}

#[test]
fn predictor_matches_library() {
    let f = fixture();
    unsafe {
        let h = load_predictor(&f.predictor_path);
        assert!(last_error().is_none());
        assert_eq!(
            CStr::from_ptr(landopt_predictor_model_id(h))
                .to_str()
                .unwrap(),
            f.predictor.model_id()
        );
        for (i, ctx) in f.contexts.iter().enumerate().take(20) {
            let mut deltas = [0.0; LANDOPT_N_TYPES];
            deltas[2] = 0.01 * i as f64;
            deltas[10] = -0.01 * i as f64;
            let mut eluc = f64::NAN;
            let status = landopt_predictor_predict(h, &c_context(ctx), deltas.as_ptr(), &mut eluc);
            assert_eq!(status, LandoptStatus::Ok);
            let expected = f.predictor.predict(ctx, &ActionDelta { deltas }).unwrap();
            assert_eq!(eluc.to_bits(), expected.to_bits());
        }
        landopt_predictor_free(h);
    }
}

#[test]
fn prescriptor_matches_library() {
    let f = fixture();
    let net = f.prescriptor.net().unwrap();
    unsafe {
        let p = load_prescriptor(&f.prescriptor_path);
        let m = load_predictor(&f.predictor_path);
        assert_eq!(
            CStr::from_ptr(landopt_prescriptor_id(p)).to_str().unwrap(),
            "p-7"
        );
        for ctx in f.contexts.iter().take(20) {
            let mut targets = [f64::NAN; LANDOPT_N_MODIFIABLE];
            let c = c_context(ctx);
            assert_eq!(
                landopt_prescriptor_prescribe(p, &c, targets.as_mut_ptr()),
                LandoptStatus::Ok
            );
            assert_eq!(targets, prescribe(&net, ctx).targets);

            let (mut eluc, mut change) = (f64::NAN, f64::NAN);
            assert_eq!(
                landopt_prescriptor_evaluate(p, m, &c, &mut eluc, &mut change),
                LandoptStatus::Ok
            );
            let o = evaluate_candidate(
                &f.prescriptor.genome,
                std::slice::from_ref(ctx),
                &f.predictor,
            )
            .unwrap();
            assert_eq!((eluc, change), (o.eluc_mean, o.change_mean));
        }
        landopt_prescriptor_free(p);
        landopt_predictor_free(m);
    }
}

#[test]
fn from_json_matches_load() {
    let f = fixture();
    let json = CString::new(f.prescriptor.to_json().unwrap()).unwrap();
    unsafe {
        let mut h = ptr::null_mut();
        assert_eq!(
            landopt_prescriptor_from_json(json.as_ptr(), &mut h),
            LandoptStatus::Ok
        );
        assert!(!h.is_null());
        landopt_prescriptor_free(h);

        let json = CString::new(f.predictor.to_json().unwrap()).unwrap();
        let mut h = ptr::null_mut();
        assert_eq!(
            landopt_predictor_from_json(json.as_ptr(), &mut h),
            LandoptStatus::Ok
        );
        assert!(!h.is_null());
        landopt_predictor_free(h);
    }
}

#[test]
fn error_statuses_and_messages() {
    let f = fixture();
    unsafe {
        let mut h: *mut LandoptPredictor = ptr::null_mut();
        assert_eq!(
            landopt_predictor_load(ptr::null(), &mut h),
            LandoptStatus::NullPointer
        );
        assert!(last_error().unwrap().contains("path"));
        assert!(h.is_null());

        let missing = f.predictor_path.with_file_name("missing.json");
        assert_eq!(
            landopt_predictor_load(c_path(&missing).as_ptr(), &mut h),
            LandoptStatus::Io
        );
        assert!(last_error().unwrap().contains("missing.json"));

        let bad = CString::new("{\"not\": \"a model\"}").unwrap();
        assert_eq!(
            landopt_predictor_from_json(bad.as_ptr(), &mut h),
            LandoptStatus::Parse
        );
        assert_eq!(
            landopt_prescriptor_from_json(bad.as_ptr(), &mut ptr::null_mut()),
            LandoptStatus::Parse
        );

        let not_utf8 = CString::new(vec![0xff, 0xfe]).unwrap();
        assert_eq!(
            landopt_predictor_load(not_utf8.as_ptr(), &mut h),
            LandoptStatus::InvalidArgument
        );

        let m = load_predictor(&f.predictor_path);
        assert!(last_error().is_none(), "a successful call clears the error");
        let mut ctx = c_context(&f.contexts[0]);
        ctx.fractions[0] += 0.5;
        let zero = [0.0; LANDOPT_N_TYPES];
        let mut eluc = 0.0;
        assert_eq!(
            landopt_predictor_predict(m, &ctx, zero.as_ptr(), &mut eluc),
            LandoptStatus::InvalidArgument
        );
        assert!(last_error().is_some());
        assert_eq!(
            landopt_predictor_predict(
                m,
                &c_context(&f.contexts[0]),
                zero.as_ptr(),
                ptr::null_mut()
            ),
            LandoptStatus::NullPointer
        );
        assert!(last_error().unwrap().contains("out_eluc"));
        assert_eq!(
            landopt_prescriptor_prescribe(ptr::null(), &ctx, [0.0; 8].as_mut_ptr()),
            LandoptStatus::NullPointer
        );
        assert!(landopt_predictor_model_id(ptr::null()).is_null());
        landopt_predictor_free(m);
        landopt_predictor_free(ptr::null_mut());
        landopt_prescriptor_free(ptr::null_mut());
    }
}

#[test]
fn version_is_package_version() {
    let v = unsafe { CStr::from_ptr(landopt_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_the_api() {
    let header =
        std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/landopt.h"))
            .unwrap();
    for name in [
        "landopt_last_error",
        "landopt_version",
        "landopt_predictor_load",
        "landopt_predictor_from_json",
        "landopt_predictor_model_id",
        "landopt_predictor_predict",
        "landopt_predictor_free",
        "landopt_prescriptor_load",
        "landopt_prescriptor_from_json",
        "landopt_prescriptor_id",
        "landopt_prescriptor_prescribe",
        "landopt_prescriptor_evaluate",
        "landopt_prescriptor_free",
        "LANDOPT_STATUS_OK = 0",
        "typedef struct LandoptPredictor LandoptPredictor",
        "double fractions[LANDOPT_N_TYPES]",
    ] {
        assert!(header.contains(name), "header is missing {name}");
    }
}

const C_PROGRAM: &str = r#"
#include <stdio.h>
#include "landopt.h"

int main(int argc, char **argv) {
    LandoptPredictor *pred = NULL;
    LandoptPrescriptor *presc = NULL;
    if (landopt_predictor_load(argv[1], &pred) != LANDOPT_STATUS_OK) {
        fprintf(stderr, "%s\n", landopt_last_error());
        return 1;
    }
    if (landopt_prescriptor_load(argv[2], &presc) != LANDOPT_STATUS_OK) {
        fprintf(stderr, "%s\n", landopt_last_error());
        return 1;
    }
    LandoptContext ctx = {0};
    ctx.lat = 10.125; ctx.lon = 20.125; ctx.area = 50000.0; ctx.year = 2005;
    ctx.fractions[0] = 0.3; ctx.fractions[2] = 0.2; ctx.fractions[10] = 0.3; ctx.fractions[11] = 0.2;
    double targets[LANDOPT_N_MODIFIABLE];
    double eluc, change;
    if (landopt_prescriptor_prescribe(presc, &ctx, targets) != LANDOPT_STATUS_OK) return 2;
    if (landopt_prescriptor_evaluate(presc, pred, &ctx, &eluc, &change) != LANDOPT_STATUS_OK) return 3;
    double sum = 0.0;
    for (int i = 0; i < LANDOPT_N_MODIFIABLE; i++) sum += targets[i];
    printf("%.17g %.17g %.17g\n", sum, eluc, change);
    ctx.fractions[0] = 0.9;
    LandoptStatus bad = landopt_prescriptor_prescribe(presc, &ctx, targets);
    printf("%d %d\n", (int)bad, landopt_last_error() != NULL);
    landopt_prescriptor_free(presc);
    landopt_predictor_free(pred);
    return 0;
}
"#;

#[test]
fn c_program_links_against_static_library() {
    let f = fixture();
    let target_dir = std::env::current_exe()
        .unwrap()
        .parent()
        .unwrap()
        .parent()
        .unwrap()
        .to_path_buf();
    let lib = target_dir.join("liblandopt_ffi.a");
    assert!(lib.exists(), "{} not built", lib.display());
    let work = tempfile::tempdir().unwrap();
    let src = work.path().join("main.c");
    let exe = work.path().join("main");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&exe)
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let out = Command::new(&exe)
        .arg(&f.predictor_path)
        .arg(&f.prescriptor_path)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8(out.stdout).unwrap();
    let mut lines = stdout.lines();
    let nums: Vec<f64> = lines
        .next()
        .unwrap()
        .split(' ')
        .map(|s| s.parse().unwrap())
        .collect();

    let ctx = CellContext {
        cell_id: String::new(),
        lat: 10.125,
        lon: 20.125,
        area: 50000.0,
        year: 2005,
        usage: landopt::LandUseVector::new(
            [0.3, 0.0, 0.2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.3, 0.2],
            0.0,
        ),
    };
    let o = evaluate_candidate(
        &f.prescriptor.genome,
        std::slice::from_ref(&ctx),
        &f.predictor,
    )
    .unwrap();
    assert!((nums[0] - ctx.usage.modifiable_budget()).abs() < 1e-12);
    assert_eq!((nums[1], nums[2]), (o.eluc_mean, o.change_mean));
    assert_eq!(
        lines.next().unwrap(),
        format!("{} 1", LandoptStatus::InvalidArgument as i32)
    );
}
