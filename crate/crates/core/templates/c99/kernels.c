//@call
    ${FN}(${SLOTS}, ${NSLOTS}, ${CONSTS}, ${NCONSTS}, step);
//@kernel norton.resistor
static void k_norton_resistor(const int *sl, int nsl, const double *kc, int nk, long step)
{
    int k;
    (void)nsl;
    (void)step;
    for (k = 0; k < W; ++k) {
        const double *c = kc + (size_t)k * nk;
        AT(sl[0], k) = 1.0 / c[0];
        AT(sl[1], k) = 0.0;
        AT(sl[2], k) = 0.0;
    }
}
//@kernel norton.inductor
static void k_norton_inductor(const int *sl, int nsl, const double *kc, int nk, long step)
{
    int k;
    (void)nsl;
    (void)step;
    for (k = 0; k < W; ++k) {
        const double *c = kc + (size_t)k * nk;
        double g = DT / (2.0 * c[0]);
        AT(sl[0], k) = g;
        AT(sl[1], k) = AT(sl[4], k) + g * AT(sl[3], k);
        AT(sl[2], k) = 0.0;
    }
}
//@kernel norton.capacitor
static void k_norton_capacitor(const int *sl, int nsl, const double *kc, int nk, long step)
{
    int k;
    (void)nsl;
    (void)step;
    for (k = 0; k < W; ++k) {
        const double *c = kc + (size_t)k * nk;
        double g = 2.0 * c[0] / DT;
        AT(sl[0], k) = g;
        AT(sl[1], k) = -AT(sl[4], k) - g * AT(sl[3], k);
        AT(sl[2], k) = 0.0;
    }
}
//@kernel norton.series_rl
static void k_norton_series_rl(const int *sl, int nsl, const double *kc, int nk, long step)
{
    int k;
    (void)nsl;
    (void)step;
    for (k = 0; k < W; ++k) {
        const double *c = kc + (size_t)k * nk;
        double x = 2.0 * c[1] / DT;
        double g = 1.0 / (c[0] + x);
        AT(sl[0], k) = g;
        AT(sl[1], k) = g * (AT(sl[3], k) + (x - c[0]) * AT(sl[4], k));
        AT(sl[2], k) = 0.0;
    }
}
//@kernel norton.voltage_source
static void k_norton_voltage_source(const int *sl, int nsl, const double *kc, int nk, long step)
{
    int k;
    double t = (double)step * DT;
    (void)nsl;
    for (k = 0; k < W; ++k) {
        const double *c = kc + (size_t)k * nk;
        double g = 1.0 / c[3];
        AT(sl[0], k) = g;
        AT(sl[1], k) = 0.0;
        AT(sl[2], k) = c[0] * cos(c[1] * t + c[2]) * g;
    }
}
//@kernel norton.current_source
static void k_norton_current_source(const int *sl, int nsl, const double *kc, int nk, long step)
{
    int k;
    double t = (double)step * DT;
    (void)nsl;
    for (k = 0; k < W; ++k) {
        const double *c = kc + (size_t)k * nk;
        AT(sl[0], k) = 0.0;
        AT(sl[1], k) = 0.0;
        AT(sl[2], k) = c[0] * cos(c[1] * t + c[2]);
    }
}
//@kernel norton.switch
static void k_norton_switch(const int *sl, int nsl, const double *kc, int nk, long step)
{
    int k;
    double t = (double)step * DT;
    (void)nsl;
    for (k = 0; k < W; ++k) {
        const double *c = kc + (size_t)k * nk;
        int closed = (c[0] != 0.0) != (t >= c[1]);
        AT(sl[0], k) = closed ? G_ON : G_OFF;
        AT(sl[1], k) = 0.0;
        AT(sl[2], k) = 0.0;
    }
}
//@kernel norton.controlled_current_source
static void k_norton_controlled_current_source(const int *sl, int nsl, const double *kc, int nk, long step)
{
    int k;
    (void)step;
    for (k = 0; k < W; ++k) {
        const double *c = kc + (size_t)k * nk;
        double drive = nsl > 5 ? AT(sl[5], k) : 0.0;
        AT(sl[0], k) = 0.0;
        AT(sl[1], k) = 0.0;
        AT(sl[2], k) = c[0] * drive;
    }
}
//@kernel norton.pv_array
static void k_norton_pv_array(const int *sl, int nsl, const double *kc, int nk, long step)
{
    int k;
    (void)nsl;
    (void)step;
    for (k = 0; k < W; ++k) {
        const double *c = kc + (size_t)k * nk;
        AT(sl[0], k) = 0.0;
        AT(sl[1], k) = 0.0;
        AT(sl[2], k) = c[2] * (c[0] / 1000.0) * (1.0 + c[3] * (c[1] - 25.0));
    }
}
//@kernel injection
static void k_injection(const int *sl, int nsl, const double *kc, int nk, long step)
{
    int k;
    (void)nsl;
    (void)kc;
    (void)nk;
    (void)step;
    for (k = 0; k < W; ++k)
        AT(sl[2], k) = AT(sl[1], k) - AT(sl[0], k);
}
//@kernel factorize
static int lu_pos[NODES > 0 ? NODES : 1];

static void lu_factor(int k)
{
    double max = 0.0, tol, l, pivot;
    int e, p, q, i, kk, start, d, end;
    for (e = 0; e < NNZ_A; ++e)
        max = fmax(max, fabs(AT(A_BASE + e, k)));
    tol = PIVOT_TOLERANCE * max;
    for (p = 0; p < NNZ_LU; ++p)
        AT(LU_BASE + p, k) = 0.0;
    for (e = 0; e < NNZ_A; ++e)
        AT(LU_BASE + LU_AMAP[e], k) = AT(A_BASE + e, k);
    for (i = 0; i < NODES; ++i) {
        start = LU_ROW_PTR[i];
        d = LU_DIAG[i];
        end = LU_ROW_PTR[i + 1];
        for (p = start; p < end; ++p)
            lu_pos[LU_COLS[p]] = p;
        for (p = start; p < d; ++p) {
            kk = LU_COLS[p];
            l = AT(LU_BASE + p, k) / AT(LU_BASE + LU_DIAG[kk], k);
            AT(LU_BASE + p, k) = l;
            for (q = LU_DIAG[kk] + 1; q < LU_ROW_PTR[kk + 1]; ++q) {
                int t = lu_pos[LU_COLS[q]];
                AT(LU_BASE + t, k) = AT(LU_BASE + t, k) - l * AT(LU_BASE + q, k);
            }
        }
        pivot = AT(LU_BASE + d, k);
        if (!(fabs(pivot) >= tol) || pivot == 0.0) {
            fprintf(stderr, "singular matrix: pivot %e at row %d below tolerance %e\n", pivot, LU_PERM[i], tol);
            exit(4);
        }
    }
}

static void k_factorize(const int *sl, int nsl, const double *kc, int nk, long step)
{
    int k, e;
    (void)sl;
    (void)nsl;
    (void)kc;
    (void)nk;
    (void)step;
    for (k = 0; k < W; ++k) {
        int changed = AT(COUNTER, k) == 0.0;
        for (e = 0; e < NNZ_A; ++e) {
            double val = signed_sum(STAMP_SLOT, STAMP_NEG, STAMP_PTR[e], STAMP_PTR[e + 1], k);
            double old = AT(A_BASE + e, k);
            if (memcmp(&val, &old, sizeof val) != 0)
                changed = 1;
            AT(A_BASE + e, k) = val;
        }
        if (changed) {
            lu_factor(k);
            AT(COUNTER, k) = AT(COUNTER, k) + 1.0;
        }
    }
}
//@kernel solve
static double lu_y[NODES > 0 ? NODES : 1];

static void k_solve(const int *sl, int nsl, const double *kc, int nk, long step)
{
    int k, i, p, q, r, c;
    double acc, va, vb, bv, bi;
    (void)sl;
    (void)nsl;
    (void)kc;
    (void)nk;
    for (k = 0; k < W; ++k) {
        for (i = 0; i < NODES; ++i) {
            r = LU_PERM[i];
            acc = signed_sum(RHS_SLOT, RHS_NEG, RHS_PTR[r], RHS_PTR[r + 1], k);
            for (p = LU_ROW_PTR[i]; p < LU_DIAG[i]; ++p)
                acc -= AT(LU_BASE + p, k) * lu_y[LU_COLS[p]];
            lu_y[i] = acc;
        }
        for (i = NODES - 1; i >= 0; --i) {
            acc = lu_y[i];
            for (q = LU_DIAG[i] + 1; q < LU_ROW_PTR[i + 1]; ++q)
                acc -= AT(LU_BASE + q, k) * lu_y[LU_COLS[q]];
            lu_y[i] = acc / AT(LU_BASE + LU_DIAG[i], k);
        }
        for (i = 0; i < NODES; ++i)
            AT(LU_PERM[i], k) = lu_y[i];
        for (r = 0; r < NODES; ++r)
            if (diverged(AT(r, k)))
                fail("node", r, step);
        for (c = 0; c < NCOMPS; ++c) {
            va = COMP_A[c] < 0 ? 0.0 : AT(COMP_A[c], k);
            vb = COMP_B[c] < 0 ? 0.0 : AT(COMP_B[c], k);
            bv = va - vb;
            AT(COMP_V[c], k) = bv;
            bi = AT(COMP_G[c], k) * bv + AT(COMP_H[c], k) - AT(COMP_S[c], k);
            AT(COMP_I[c], k) = bi;
            if (diverged(bi))
                fail("component", c, step);
        }
    }
}
//@kernel ctrl.gain
static void k_ctrl_gain(const int *sl, int nsl, const double *kc, int nk, long step)
{
    int k;
    (void)nsl;
    for (k = 0; k < W; ++k) {
        const double *c = kc + (size_t)k * nk;
        double y = c[0] * AT(sl[1], k);
        if (diverged(y))
            fail("block", sl[0], step);
        AT(sl[0], k) = y;
    }
}
//@kernel ctrl.sum
static void k_ctrl_sum(const int *sl, int nsl, const double *kc, int nk, long step)
{
    int k, i;
    for (k = 0; k < W; ++k) {
        const double *c = kc + (size_t)k * nk;
        double acc = 0.0;
        for (i = 0; i < nsl - 1; ++i)
            acc += c[i] * AT(sl[1 + i], k);
        if (diverged(acc))
            fail("block", sl[0], step);
        AT(sl[0], k) = acc;
    }
}
//@kernel ctrl.integrator
static void k_ctrl_integrator(const int *sl, int nsl, const double *kc, int nk, long step)
{
    int k;
    (void)nsl;
    (void)kc;
    (void)nk;
    for (k = 0; k < W; ++k) {
        double x = AT(sl[2], k);
        double y = AT(sl[0], k) + 0.5 * DT * (x + AT(sl[1], k));
        if (diverged(y))
            fail("block", sl[0], step);
        AT(sl[1], k) = x;
        AT(sl[0], k) = y;
    }
}
//@kernel ctrl.first_order_lag
static void k_ctrl_first_order_lag(const int *sl, int nsl, const double *kc, int nk, long step)
{
    int k;
    (void)nsl;
    for (k = 0; k < W; ++k) {
        const double *c = kc + (size_t)k * nk;
        double x = AT(sl[2], k);
        double den = 2.0 * c[0] + DT;
        double y = (2.0 * c[0] - DT) / den * AT(sl[0], k) + c[1] * DT / den * (x + AT(sl[1], k));
        if (diverged(y))
            fail("block", sl[0], step);
        AT(sl[1], k) = x;
        AT(sl[0], k) = y;
    }
}
//@kernel ctrl.limiter
static void k_ctrl_limiter(const int *sl, int nsl, const double *kc, int nk, long step)
{
    int k;
    (void)nsl;
    for (k = 0; k < W; ++k) {
        const double *c = kc + (size_t)k * nk;
        double x = AT(sl[1], k), y;
        if (x < c[0])
            y = c[0];
        else if (x > c[1])
            y = c[1];
        else
            y = x;
        if (diverged(y))
            fail("block", sl[0], step);
        AT(sl[0], k) = y;
    }
}
//@kernel ctrl.pi_controller
static void k_ctrl_pi_controller(const int *sl, int nsl, const double *kc, int nk, long step)
{
    int k;
    (void)nsl;
    for (k = 0; k < W; ++k) {
        const double *c = kc + (size_t)k * nk;
        double x = AT(sl[3], k);
        double s0 = AT(sl[1], k) + 0.5 * DT * (c[1] * x + c[1] * AT(sl[2], k));
        double y = c[0] * x + s0;
        if (diverged(y))
            fail("block", sl[0], step);
        AT(sl[1], k) = s0;
        AT(sl[2], k) = x;
        AT(sl[0], k) = y;
    }
}
//@kernel ctrl.comparator
static void k_ctrl_comparator(const int *sl, int nsl, const double *kc, int nk, long step)
{
    int k;
    (void)nsl;
    (void)kc;
    (void)nk;
    (void)step;
    for (k = 0; k < W; ++k)
        AT(sl[0], k) = AT(sl[1], k) >= AT(sl[2], k) ? 1.0 : 0.0;
}
//@kernel ctrl.constant
static void k_ctrl_constant(const int *sl, int nsl, const double *kc, int nk, long step)
{
    int k;
    (void)nsl;
    for (k = 0; k < W; ++k) {
        double y = kc[(size_t)k * nk];
        if (diverged(y))
            fail("block", sl[0], step);
        AT(sl[0], k) = y;
    }
}
//@kernel ctrl.delay
static void k_ctrl_delay(const int *sl, int nsl, const double *kc, int nk, long step)
{
    int k;
    (void)nsl;
    (void)kc;
    (void)nk;
    (void)step;
    for (k = 0; k < W; ++k)
        AT(sl[0], k) = AT(sl[1], k);
}
