fn main() {
    std::process::exit(pregroups_cli::run());
}

mod pregroups_cli {
    pub fn run() -> i32 {
        eprintln!("cli not wired yet");
        2
    }
}
