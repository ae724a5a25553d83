#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use triage::corpus::Dimension;
use triage::{LinearModel, SparseVector};

pub const PHONE_FORMATS: [&str; 10] = [
    "+57 300 123 4567",
    "+573001234567",
    "(601) 555-1234",
    "300-123-4567",
    "300.123.4567",
    "+1 (555) 123-4567",
    "555 123 4567",
    "+44 20 7946 0958",
    "+34 612 34 56 78",
    "+52-55-1234-5678",
];

const EMAILS: [&str; 10] = [
    "ana.maria@correo.com.co",
    "juan_perez+denuncias@mail.example.org",
    "MARIA@Hotmail.COM",
    "x@y.io",
    "user99@sub.dominio.edu.co",
    "k.lopez@empresa-segura.net",
    "contacto@ong.org",
    "first.last@uni.ac.uk",
    "a1b2c3@gmail.com",
    "soporte_tecnico@app.co",
];

const URLS: [&str; 10] = [
    "https://instagram.com/usuario_123?x=1",
    "www.facebook.com/perfil.123",
    "http://t.me/grupo",
    "HTTPS://Example.ORG/a/b#frag",
    "https://sitio7.co/perfil/42",
    "http://bit.ly/3xYz",
    "https://www.tiktok.com/@nombre",
    "www.ejemplo.com.co/foro?id=77&p=2",
    "https://discord.gg/abcDEF",
    "http://192.168.0.1/panel",
];

const IDS: [&str; 10] = [
    "123456",
    "1234567",
    "12345678",
    "123456789",
    "1023456789",
    "10234567890",
    "900123",
    "80012345",
    "5551234",
    "71234567890",
];

const FRAMES: [&str; 10] = [
    "me escribió desde {} y me pidió fotos",
    "he messaged me at {} asking for pictures",
    "el perfil {} amenaza con publicar todo",
    "contact: ({}) por favor revisen",
    "ela mandou mensagem para {} ontem à noite",
    "[{}] sent the link twice",
    "número o correo: {}.",
    "mi cédula es {}, y la de mi hermana no",
    "«{}» apareció en el chat del colegio",
    "they said call {}; I didn't",
];

/// 200 strings: every PII family in every frame, plus mixed strings that
/// carry two or three items at once.
pub fn pii_corpus() -> Vec<String> {
    let mut out = Vec::new();
    for (i, frame) in FRAMES.iter().enumerate() {
        for item in [EMAILS[i], URLS[i], PHONE_FORMATS[i], IDS[i]] {
            out.push(frame.replace("{}", item));
        }
    }
    for i in 0..10 {
        out.push(FRAMES[i].replace("{}", PHONE_FORMATS[(i + 3) % 10]));
        out.push(FRAMES[(i + 5) % 10].replace("{}", PHONE_FORMATS[(i + 7) % 10]));
    }
    for i in 0..140 {
        let a = EMAILS[i % 10];
        let b = URLS[(i / 10) % 10];
        let c = PHONE_FORMATS[(i * 3) % 10];
        let d = IDS[(i * 7) % 10];
        out.push(match i % 5 {
            0 => format!("{a} {b}"),
            1 => format!("hola, escríbeme a {a} o llama al {c}. gracias"),
            2 => format!("ID {d}; tel {c}; web {b}"),
            3 => format!("{a}{d}"),
            _ => format!("ver {b} y {c}, o {a}"),
        });
    }
    out
}

/// Detectors written independently of the scrubber's own patterns. They
/// are deliberately looser: any run of six or more digits, separators
/// allowed, counts as a residual.
pub struct ResidualCheck {
    url: Regex,
    email: Regex,
    digits: Regex,
}

impl ResidualCheck {
    pub fn new() -> Self {
        ResidualCheck {
            url: Regex::new(r"(?i)https?://|www\.").unwrap(),
            email: Regex::new(r"(?i)[^\s@<>]+@[^\s@<>]+\.[a-z]{2,}").unwrap(),
            digits: Regex::new(r"\d(?:[\s().+\-]*\d){5,}").unwrap(),
        }
    }

    pub fn residuals(&self, text: &str) -> Vec<String> {
        [&self.url, &self.email, &self.digits]
            .iter()
            .flat_map(|re| re.find_iter(text).map(|m| m.as_str().to_string()))
            .collect()
    }
}

fn random_instance(rng: &mut ChaCha8Rng) -> (LinearModel, Vec<SparseVector>, Vec<Vec<bool>>) {
    let dim = rng.random_range(1..=64);
    let classes = rng.random_range(1..=8);
    let batch = rng.random_range(1..=6);
    let names = (0..classes).map(|c| format!("c{c}")).collect();
    let mut model = LinearModel::random(Dimension::Subject, names, dim, 0.5, rng).unwrap();
    for b in model.biases.iter_mut() {
        *b = rng.random_range(-1.0..1.0);
    }
    let xs = (0..batch)
        .map(|_| SparseVector::from_dense(&(0..dim).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>()))
        .collect();
    let ys = (0..batch).map(|_| (0..classes).map(|_| rng.random_bool(0.4)).collect()).collect();
    (model, xs, ys)
}

fn batch_loss(model: &LinearModel, xs: &[SparseVector], ys: &[Vec<bool>]) -> f64 {
    let batch: Vec<(&SparseVector, &[bool])> = xs.iter().zip(ys).map(|(x, y)| (x, y.as_slice())).collect();
    model.loss(&batch).unwrap()
}

fn central_difference(
    model: &mut LinearModel,
    xs: &[SparseVector],
    ys: &[Vec<bool>],
    step: f64,
    param: impl Fn(&mut LinearModel) -> &mut f64,
) -> f64 {
    let v = *param(model);
    *param(model) = v + step;
    let up = batch_loss(model, xs, ys);
    *param(model) = v - step;
    let down = batch_loss(model, xs, ys);
    *param(model) = v;
    (up - down) / (2.0 * step)
}

/// Worst relative error between analytic and central-difference gradients
/// over `instances` random models (feature dim <= 64, <= 8 classes).
pub fn max_gradient_error(seed: u64, instances: usize, step: f64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-8);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let (mut model, xs, ys) = random_instance(&mut rng);
        let batch: Vec<(&SparseVector, &[bool])> = xs.iter().zip(&ys).map(|(x, y)| (x, y.as_slice())).collect();
        let g = model.gradient(&batch).unwrap();
        for i in 0..model.weights.len() {
            let n = central_difference(&mut model, &xs, &ys, step, |m| &mut m.weights[i]);
            worst = worst.max(rel(g.weights[i], n));
        }
        for c in 0..model.biases.len() {
            let n = central_difference(&mut model, &xs, &ys, step, |m| &mut m.biases[c]);
            worst = worst.max(rel(g.biases[c], n));
        }
    }
    worst
}

pub fn random_gradient_instance(seed: u64) -> (LinearModel, Vec<SparseVector>, Vec<Vec<bool>>) {
    random_instance(&mut ChaCha8Rng::seed_from_u64(seed))
}
