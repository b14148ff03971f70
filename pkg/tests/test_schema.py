import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedprov.errors import ValidationError
from fedprov.schema import (
    CSV_HEADER,
    FEATURE_COLUMNS,
    Dataset,
    dataset_to_matrix,
    encode_features,
    partition_by_province,
    read_csv,
    split_train_test,
    standardize_apply,
    standardize_fit,
    with_missing,
    write_csv,
)

from conftest import make_dataset, make_record


class TestEncodeFeatures:
    def test_column_order_is_the_documented_contract(self):
        assert FEATURE_COLUMNS == (
            "age", "sex_male", "sbp", "bmi", "ldl", "hdl", "hba1c", "tg",
            "hypertension", "depression", "osteoarthritis", "copd",
            "htn_med", "corticosteroids",
        )

    def test_all_binary_false_age_18(self):
        rec = make_record(age=18.0)
        vec = encode_features(rec)
        assert vec[0] == 18.0
        for name in ("sex_male", "hypertension", "depression", "osteoarthritis",
                     "copd", "htn_med", "corticosteroids"):
            assert vec[FEATURE_COLUMNS.index(name)] == 0.0

    def test_record_at_cohort_means(self):
        rec = make_record()
        vec = encode_features(rec)
        expected = [57.1, 0.0, 126.41, 28.94, 2.82, 1.43, 5.936, 1.47] + [0.0] * 6
        assert np.allclose(vec, expected)

    def test_missing_bmi_maps_to_nan(self):
        rec = with_missing(make_record(), ("bmi",))
        vec = encode_features(rec)
        assert np.isnan(vec[FEATURE_COLUMNS.index("bmi")])
        mask = np.ones(14, dtype=bool)
        mask[FEATURE_COLUMNS.index("bmi")] = False
        assert np.isfinite(vec[mask]).all()

    def test_out_of_range_value_names_the_field(self):
        with pytest.raises(ValidationError, match="age"):
            make_record(age=17.0)
        with pytest.raises(ValidationError, match="sbp"):
            make_record(sbp=300.0)
        with pytest.raises(ValidationError, match="hdl"):
            make_record(hdl=0.0)

    def test_binary_fields_must_be_0_or_1(self):
        with pytest.raises(ValidationError, match="copd"):
            make_record(copd=2)

    def test_only_the_five_lab_fields_may_be_missing(self):
        with pytest.raises(ValidationError, match="age"):
            make_record(age=None)
        with pytest.raises(ValidationError):
            with_missing(make_record(), ("age",))


class TestSplit:
    def test_70_30_on_ten_records(self):
        ds = make_dataset(10)
        train, test = split_train_test(ds, 0.7, seed=1)
        assert len(train.records) == 7 and len(test.records) == 3
        assert set(train.records).isdisjoint(test.records)
        assert set(train.records) | set(test.records) == set(ds.records)

    def test_same_seed_same_split(self):
        ds = make_dataset(25)
        a = split_train_test(ds, 0.7, seed=9)
        b = split_train_test(ds, 0.7, seed=9)
        assert a[0].records == b[0].records and a[1].records == b[1].records

    def test_fraction_one_puts_everything_in_train(self):
        ds = make_dataset(5)
        train, test = split_train_test(ds, 1.0, seed=0)
        assert len(train.records) == 5 and len(test.records) == 0

    def test_empty_dataset_rejected(self):
        with pytest.raises(ValidationError):
            split_train_test(Dataset(records=()), 0.7, seed=0)

    def test_bad_fraction_rejected(self):
        ds = make_dataset(4)
        for f in (0.0, -0.1, 1.5):
            with pytest.raises(ValidationError):
                split_train_test(ds, f, seed=0)

    @given(n=st.integers(1, 60), seed=st.integers(0, 2**31 - 1),
           fraction=st.floats(0.05, 1.0))
    @settings(max_examples=40, deadline=None)
    def test_split_is_a_partition(self, n, seed, fraction):
        ds = make_dataset(n)
        train, test = split_train_test(ds, fraction, seed)
        assert len(train.records) + len(test.records) == n
        assert sorted(map(id, train.records + test.records)) == sorted(
            map(id, ds.records)
        )


class TestPartition:
    def test_grouping(self):
        recs = (
            make_record(province="AB"),
            make_record(province="AB", age=40.0),
            make_record(province="ON"),
        )
        parts = partition_by_province(Dataset(records=recs))
        assert len(parts["AB"].records) == 2
        assert len(parts["ON"].records) == 1

    def test_nb_excluded_with_logged_count(self, caplog):
        recs = (make_record(province="NB"), make_record(province="ON"))
        with caplog.at_level(logging.INFO, logger="fedprov.schema"):
            parts = partition_by_province(Dataset(records=recs))
        assert "NB" not in parts
        assert len(parts["ON"].records) == 1
        assert "excluded 1" in caplog.text

    def test_pei_alias_recognized_and_excluded(self):
        rec = make_record(province="PEI")
        assert rec.province == "PE"
        parts = partition_by_province(Dataset(records=(rec,)))
        assert parts == {}

    def test_empty_dataset_gives_empty_map(self):
        assert partition_by_province(Dataset(records=())) == {}

    def test_unknown_code_rejected_at_construction(self):
        with pytest.raises(ValidationError, match="XX"):
            make_record(province="XX")

    def test_partition_sizes_sum_to_n_minus_excluded(self):
        recs = tuple(
            make_record(province=p)
            for p in ("AB", "AB", "BC", "NB", "PE", "QC", "QC", "QC")
        )
        parts = partition_by_province(Dataset(records=recs))
        assert sum(len(d.records) for d in parts.values()) == len(recs) - 2


class TestStandardizer:
    def test_two_point_column(self):
        m = dataset_to_matrix(make_dataset(2))
        m.x[0, 0], m.x[1, 0] = 57.0 + 1, 57.0 + 3  # mean 58, std 1
        s = standardize_fit(m)
        out = standardize_apply(s, m)
        assert np.allclose(out.x[:, 0], [-1.0, 1.0])

    def test_fit_apply_centers_continuous_columns(self):
        ds = make_dataset(50)
        m = dataset_to_matrix(ds)
        out = standardize_apply(standardize_fit(m), m)
        assert abs(out.x[:, 0].mean()) < 1e-9  # age column
        assert abs(out.x[:, 0].std() - 1.0) < 1e-9

    def test_binary_column_passthrough(self):
        m = dataset_to_matrix(make_dataset(3))
        m.x[:, 1] = [0.0, 1.0, 1.0]
        out = standardize_apply(standardize_fit(m), m)
        assert list(out.x[:, 1]) == [0.0, 1.0, 1.0]

    def test_constant_continuous_column_floors_std_with_warning(self):
        m = dataset_to_matrix(make_dataset(5))
        m.x[:, 2] = 120.0  # constant sbp
        with pytest.warns(UserWarning, match="sbp"):
            s = standardize_fit(m)
        assert s.std[2] == pytest.approx(1e-8)


class TestCsv:
    def test_round_trip_three_records(self, tmp_path):
        ds = make_dataset(3)
        path = tmp_path / "cohort.csv"
        write_csv(ds, path)
        back = read_csv(path)
        assert back.records == ds.records

    def test_empty_bmi_cell_reads_as_missing(self, tmp_path):
        ds = Dataset(records=(with_missing(make_record(), ("bmi", "tg")),))
        path = tmp_path / "m.csv"
        write_csv(ds, path)
        back = read_csv(path)
        assert back.records[0].bmi is None
        assert back.records[0].tg is None
        assert back.records[0].ldl == 2.82

    def test_header_mismatch_lists_expected_and_found(self, tmp_path):
        path = tmp_path / "bad.csv"
        header = ",".join(c for c in CSV_HEADER if c != "hba1c")
        path.write_text(header + "\n")
        with pytest.raises(ValidationError, match="expected.*found"):
            read_csv(path)

    def test_malformed_row_reports_line_number(self, tmp_path):
        path = tmp_path / "bad.csv"
        write_csv(make_dataset(2), path)
        with open(path, "a") as fh:
            fh.write("not,enough,fields\n")
        with pytest.raises(ValidationError, match="line 4"):
            read_csv(path)

    def test_empty_required_field_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        lines = [",".join(CSV_HEADER)]
        rec = make_record()
        row = [""] + [str(getattr(rec, c)) for c in CSV_HEADER[1:-2]] + ["0", "AB"]
        lines.append(",".join(row))
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(ValidationError, match="age"):
            read_csv(path)

    @given(
        age=st.floats(18.0, 99.0, allow_nan=False),
        bmi=st.one_of(st.none(), st.floats(11.0, 66.48, allow_nan=False)),
        tg=st.one_of(st.none(), st.floats(0.2, 25.57, allow_nan=False)),
        sex=st.integers(0, 1),
        label=st.integers(0, 1),
        province=st.sampled_from(["AB", "QC", "NB", "PE"]),
    )
    @settings(max_examples=60, deadline=None)
    def test_round_trip_is_lossless(self, tmp_path_factory, age, bmi, tg, sex, label, province):
        rec = make_record(age=age, bmi=bmi, tg=tg, sex_male=sex, diabetes=label,
                          province=province)
        path = tmp_path_factory.mktemp("csv") / "one.csv"
        write_csv(Dataset(records=(rec,)), path)
        assert read_csv(path).records[0] == rec


def test_canary_record_survives_the_pipeline_in_order():
    # distinctive values per column; encode -> no-op impute -> model input
    from fedprov.impute import mice_impute

    rec = make_record(
        age=61.0, sex_male=1, sbp=141.0, bmi=31.5, ldl=3.3, hdl=1.1,
        hba1c=6.5, tg=2.2, hypertension=1, depression=0, osteoarthritis=1,
        copd=0, htn_med=1, corticosteroids=0,
    )
    expected = [61.0, 1.0, 141.0, 31.5, 3.3, 1.1, 6.5, 2.2, 1, 0, 1, 0, 1, 0]
    ds = Dataset(records=(rec, make_record()))
    matrix = mice_impute(ds)
    assert matrix.column_names == FEATURE_COLUMNS
    assert np.allclose(matrix.x[0], expected)
