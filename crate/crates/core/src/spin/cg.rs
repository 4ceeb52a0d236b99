/// Factorial of a doubled-integer argument `two_n / 2`; `None` if negative or odd.
fn half_fact(two_n: i32) -> Option<f64> {
    if two_n < 0 || two_n % 2 != 0 {
        return None;
    }
    Some((1..=two_n / 2).fold(1.0, |acc, k| acc * k as f64))
}

/// Clebsch–Gordan coefficient ⟨j1 m1; j2 m2 | J M⟩ with all arguments doubled.
///
/// Racah's closed sum; returns 0 for forbidden combinations.
pub fn clebsch_gordan(two_j1: i32, two_m1: i32, two_j2: i32, two_m2: i32, two_j: i32, two_m: i32) -> f64 {
    if two_m1 + two_m2 != two_m {
        return 0.0;
    }
    if two_m1.abs() > two_j1 || two_m2.abs() > two_j2 || two_m.abs() > two_j {
        return 0.0;
    }
    if two_j < (two_j1 - two_j2).abs() || two_j > two_j1 + two_j2 {
        return 0.0;
    }
    let f = |x: i32| half_fact(x);
    let tri = match (
        f(two_j + two_j1 - two_j2),
        f(two_j - two_j1 + two_j2),
        f(two_j1 + two_j2 - two_j),
        f(two_j1 + two_j2 + two_j + 2),
    ) {
        (Some(a), Some(b), Some(c), Some(d)) => a * b * c / d,
        _ => return 0.0,
    };
    let mut norm = (two_j + 1) as f64 * tri;
    for x in [
        two_j + two_m,
        two_j - two_m,
        two_j1 - two_m1,
        two_j1 + two_m1,
        two_j2 - two_m2,
        two_j2 + two_m2,
    ] {
        match f(x) {
            Some(v) => norm *= v,
            None => return 0.0,
        }
    }
    let mut sum = 0.0;
    let mut two_k = 0;
    loop {
        let args = [
            two_k,
            two_j1 + two_j2 - two_j - two_k,
            two_j1 - two_m1 - two_k,
            two_j2 + two_m2 - two_k,
            two_j - two_j2 + two_m1 + two_k,
            two_j - two_j1 - two_m2 + two_k,
        ];
        if args[1] < 0 || args[2] < 0 || args[3] < 0 {
            break;
        }
        if args[4] >= 0 && args[5] >= 0 {
            let denom: f64 = args.iter().map(|&a| f(a).unwrap_or(f64::INFINITY)).product();
            let sign = if (two_k / 2) % 2 == 0 { 1.0 } else { -1.0 };
            sum += sign / denom;
        }
        two_k += 2;
    }
    norm.sqrt() * sum
}
