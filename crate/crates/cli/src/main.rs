fn main() {
    println!("rignovel");
}
