//! Prints a scripted conversation; handy for eyeballing content changes.

use std::sync::Arc;

use rapport_core::content::load_assets;
use rapport_core::engine::{Engine, EngineConfig, PoqPolicy};
use rapport_core::user::UserModel;

fn main() {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "data".to_string());
    let bank = Arc::new(load_assets(&dir).expect("valid bank"));
    let engine = Engine::new(bank, EngineConfig { poq_ask_rate: 0.6, ..EngineConfig::default() });
    let mut model = UserModel::new("demo");
    let (mut state, first) = engine.start("demo", &mut model, PoqPolicy::ALL, 3);
    println!("BOT: {}", first.text);
    let script = [
        "i'm sam", "reading and biking", "i work at a bakery", "yeah", "japan", "the food",
        "meeting people", "no", "i play video games", "talk about more animals", "what is your name",
        "dinosaurs", "cool", "a t rex", "jurassic park", "brontosaurus", "i don't know", "i'd hide in a cave",
        "nice", "ok", "let's talk about food", "pizza", "stop",
    ];
    for line in script {
        println!("USER: {line}");
        match engine.advance(&mut state, &mut model, line) {
            Ok(out) => println!(
                "BOT: {}\n     {}",
                out.response.text,
                serde_json::to_string(&out.response.annotations).unwrap()
            ),
            Err(e) => println!("ERR: {e}"),
        }
    }
}
