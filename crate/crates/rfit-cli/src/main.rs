fn main() {
    println!("rfit");
}
