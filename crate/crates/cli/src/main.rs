// Scenario runs allocate many grid-sized buffers per step; the system
// allocator returns them to the kernel and pays page faults on reuse.
#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

fn main() {
    std::process::exit(oldroyd2d_cli::cli_main(std::env::args_os()));
}
