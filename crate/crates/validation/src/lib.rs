//! Holds the `acceptance` test target, which checks the numerical and
//! behavioural acceptance criteria across the whole workspace.
