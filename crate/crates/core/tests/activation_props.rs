use amc::activation::{
    interpolate, rle_decode, rle_encode_raw, warp, ActivationVectorField, BorderPolicy,
    HEADER_BYTES, PAIR_BYTES, Q88,
};
use amc::Shape3;
use proptest::prelude::*;

prop_compose! {
    fn sparse_tensor()(c in 1usize..4, h in 1usize..24, w in 1usize..24)
        (values in prop::collection::vec(prop_oneof![6 => Just(0i16), 1 => any::<i16>()], c * h * w),
         shape in Just(Shape3::new(c, h, w))) -> (Shape3, Vec<Q88>) {
        (shape, values.into_iter().map(Q88).collect())
    }
}

fn clamp(i: i64, n: usize) -> usize {
    i.clamp(0, n as i64 - 1) as usize
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn round_trip_and_size_bound((shape, values) in sparse_tensor()) {
        let s = rle_encode_raw(shape, &values, 0.0).unwrap();
        prop_assert_eq!(s.decode_raw(), values.clone());
        prop_assert_eq!(rle_decode(&s).data().len(), shape.len());

        let plane = shape.height * shape.width;
        let mut bound_pairs = 0;
        for ch in values.chunks(plane) {
            bound_pairs += ch.iter().filter(|v| v.0 != 0).count() + 1;
            let mut run = 0;
            for v in ch.iter().chain(std::iter::once(&Q88(1))) {
                if v.0 == 0 {
                    run += 1;
                } else {
                    bound_pairs += run / 256;
                    run = 0;
                }
            }
        }
        let bound = HEADER_BYTES + 4 * shape.channels + PAIR_BYTES * bound_pairs;
        prop_assert!(s.encoded_bytes() <= bound, "{} > {}", s.encoded_bytes(), bound);
        prop_assert_eq!(s.to_bytes().len(), s.encoded_bytes());
    }

    #[test]
    fn warp_is_convex((shape, values) in sparse_tensor(), vectors in prop::collection::vec((-1200i16..1200, -1200i16..1200), 24 * 24)) {
        let s = rle_encode_raw(shape, &values, 0.0).unwrap();
        let (h, w) = (shape.height, shape.width);
        let field = ActivationVectorField {
            height: h,
            width: w,
            vectors: vectors[..h * w].iter().map(|&(a, b)| (Q88(a), Q88(b))).collect(),
        };
        let out = warp(&s, &field, BorderPolicy::ClampToEdge).unwrap();
        let dense = s.decode_raw();
        for c in 0..shape.channels {
            for y in 0..h {
                for x in 0..w {
                    let (dy, dx) = field.get(y, x);
                    let fy = (y as i64 * 256 + dy.0 as i64).div_euclid(256);
                    let fx = (x as i64 * 256 + dx.0 as i64).div_euclid(256);
                    let n: Vec<i16> = [(fy, fx), (fy, fx + 1), (fy + 1, fx), (fy + 1, fx + 1)]
                        .iter()
                        .map(|&(yy, xx)| dense[c * h * w + clamp(yy, h) * w + clamp(xx, w)].0)
                        .collect();
                    let got = Q88::from_f32(out.get(c, y, x)).0;
                    prop_assert!(*n.iter().min().unwrap() <= got && got <= *n.iter().max().unwrap());
                }
            }
        }
    }

    #[test]
    fn integer_vectors_are_index_shifts((shape, values) in sparse_tensor(), dy in -3i64..=3, dx in -3i64..=3) {
        let s = rle_encode_raw(shape, &values, 0.0).unwrap();
        let (h, w) = (shape.height, shape.width);
        let field = ActivationVectorField::uniform(h, w, Q88((dy * 256) as i16), Q88((dx * 256) as i16));
        let out = warp(&s, &field, BorderPolicy::Zero).unwrap();
        for c in 0..shape.channels {
            for y in 0..h as i64 {
                for x in 0..w as i64 {
                    let (sy, sx) = (y + dy, x + dx);
                    let expected = if (0..h as i64).contains(&sy) && (0..w as i64).contains(&sx) {
                        values[c * h * w + sy as usize * w + sx as usize].to_f32()
                    } else {
                        0.0
                    };
                    prop_assert_eq!(out.get(c, y as usize, x as usize), expected);
                }
            }
        }
    }

    #[test]
    fn zero_fraction_selects_top_left(n in prop::array::uniform4(any::<i16>())) {
        let n = n.map(Q88);
        prop_assert_eq!(interpolate(n, 0, 0), n[0]);
    }
}
