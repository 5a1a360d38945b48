macro_rules! example {
    ($name:ident) => {
        #[allow(dead_code)]
        mod $name {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", stringify!($name), ".rs"));
        }

        #[test]
        fn $name() {
            $name::run_example().expect(stringify!($name));
        }
    };
}

example!(nondimensionalize);
example!(forward_profiles);
example!(gradient_check);
example!(duality_check);
example!(fit_delta1);
example!(functional_sweep);
example!(noise_study);
example!(recovery_study);
example!(error_estimate);
