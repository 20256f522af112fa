//! Regenerates derived corpus artifacts: stub fixtures, default
//! concretization maps (only when missing), golden CSV scripts and golden
//! Promela models.
//! Usage: regen_corpus <corpus dir>
use std::path::Path;

use std::collections::BTreeMap;

use scver::integration::*;
use scver::kernel::{EnvPolicy, Kernel, KernelConfig};
use scver::testgen::*;

fn learn(dir: &Path, file: &str, inst: &str) -> InterfaceStub {
    let src = std::fs::read_to_string(dir.join(file)).unwrap();
    let ast = scver::scl::parse(&src).unwrap();
    learn_stub(&ast, inst, DEFAULT_K, DEFAULT_H, &LearnConfig::default()).unwrap()
}

fn write(dir: &Path, name: &str, s: &InterfaceStub) {
    std::fs::write(dir.join("fixtures").join(name), s.to_json_string()).unwrap();
}

/// Drops the transition on the longest-history state with the highest index.
fn delete_one(mut s: InterfaceStub) -> InterfaceStub {
    let t = *s.transitions.iter().max_by_key(|t| (s.states[t.from].len(), t.from, t.letter)).unwrap();
    s.remove_transition(t);
    s
}

fn main() {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "corpus".into());
    let dir = Path::new(&dir);
    std::fs::create_dir_all(dir.join("fixtures")).unwrap();

    write(dir, "counter_v1.c.stub.json", &learn(dir, "counter_v1.scl", "c"));
    write(dir, "counter_v1.c.deleted.stub.json", &delete_one(learn(dir, "counter_v1.scl", "c")));
    write(dir, "ecu_system.hw.deleted.stub.json", &delete_one(learn(dir, "ecu_system.scl", "hw")));
    write(dir, "ecu_system.sw.stub.json", &learn(dir, "ecu_system.scl", "sw"));

    // Source may also emit 3 wherever it emits 2.
    let mut s = learn(dir, "relaxed_system.scl", "src");
    let extra: Vec<(usize, Letter, usize)> = s
        .transitions
        .iter()
        .filter(|t| s.letters[t.letter].values[0] == 2)
        .map(|t| {
            let mut l = s.letters[t.letter].clone();
            l.values[0] = 3;
            (t.from, l, t.to)
        })
        .collect();
    for (from, l, to) in extra {
        s.add_transition(from, l, to);
    }
    write(dir, "relaxed_system.src.relaxed.stub.json", &s);

    for name in models(dir) {
        let stem = name.trim_end_matches(".scl");
        let d = scver::scl::elaborate(&scver::scl::parse(&std::fs::read_to_string(dir.join(&name)).unwrap()).unwrap()).unwrap();
        let map_path = dir.join("maps").join(format!("{stem}.map.json"));
        if !map_path.exists() {
            std::fs::create_dir_all(dir.join("maps")).unwrap();
            let text = serde_json::to_string_pretty(&default_map(&d, stem)).unwrap() + "\n";
            std::fs::write(&map_path, text).unwrap();
        }
        let map: ConcretizationMap = serde_json::from_str(&std::fs::read_to_string(&map_path).unwrap()).unwrap();
        let k = Kernel::new(&d, KernelConfig::default(), EnvPolicy::MostGeneral);
        let goals = enumerate_goals(&d, &[Criterion::Statements, Criterion::Toggles]);
        let g = generate_tests(&k, &goals, 5_000_000);
        let out = concretize(&g.tests, &map).unwrap();
        std::fs::create_dir_all(dir.join("golden")).unwrap();
        std::fs::write(dir.join("golden").join(format!("{stem}.stimulus.csv")), out.stimulus).unwrap();
        std::fs::write(dir.join("golden").join(format!("{stem}.expect.csv")), out.expectations).unwrap();
        let pml = scver::promela::emit_promela(&d, None, &scver::promela::EmitOptions::default()).unwrap();
        std::fs::write(dir.join("golden").join(format!("{stem}.pml")), pml).unwrap();
    }
}

fn models(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".scl"))
        .collect();
    v.sort();
    v
}

fn default_map(d: &scver::scl::Design, stem: &str) -> ConcretizationMap {
    let mut channels = BTreeMap::new();
    let named = d.inputs.iter().map(|i| (&i.name, &i.ty)).chain(d.signals.iter().filter(|s| s.is_port()).map(|s| (&s.name, &s.ty)));
    for (name, ty) in named {
        let values = ty
            .values()
            .map(|v| {
                let abs = ty.render(v);
                let conc = match ty {
                    scver::scl::ScalarType::Bool => if v != 0 { "1".into() } else { "0".into() },
                    _ => abs.clone(),
                };
                (abs, conc)
            })
            .collect();
        channels.insert(name.clone(), ChannelMap { channel: name.replace('.', "_").to_uppercase(), values });
    }
    let header = [("model".to_string(), stem.to_string()), ("unit".to_string(), "us".to_string())].into();
    ConcretizationMap { time_scale: 1000, test_gap: 1, header, channels }
}
