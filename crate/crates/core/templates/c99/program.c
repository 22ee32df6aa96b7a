/* ${TITLE} */
#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#define W ${WIDTH}
#define EXTENT ${EXTENT}
#define DT ${DT}
#define NODES ${NODES}
#define A_BASE ${A_BASE}
#define LU_BASE ${LU_BASE}
#define COUNTER ${COUNTER}
#define G_ON ${G_ON}
#define G_OFF ${G_OFF}
#define PIVOT_TOLERANCE ${PIVOT_TOLERANCE}
#define DIVERGENCE_LIMIT ${DIVERGENCE_LIMIT}

static double *A;

#define AT(s, k) A[(size_t)(s) * W + (size_t)(k)]

static void fail(const char *what, long id, long step)
{
    fprintf(stderr, "non-finite or divergent value in `%s %ld` at step %ld\n", what, id, step);
    exit(3);
}

static int diverged(double v)
{
    return !isfinite(v) || fabs(v) > DIVERGENCE_LIMIT;
}

static double signed_sum(const int *slot, const unsigned char *neg, int lo, int hi, int k)
{
    double acc = 0.0;
    int q;
    for (q = lo; q < hi; ++q) {
        if (neg[q])
            acc -= AT(slot[q], k);
        else
            acc += AT(slot[q], k);
    }
    return acc;
}

${TABLES}
${KERNELS}
static void step_all(long step)
{
${STEP_BODY}}

static const char *CHANNEL_HEADER = ${CHANNEL_HEADER};
static const int CHANNEL_SLOTS[] = {${CHANNEL_SLOTS}};
#define NCHANNELS ${NCHANNELS}

static void usage(void)
{
    fprintf(stderr, "usage: prog --state <file> --steps <n> --out <waveforms>\n");
    exit(2);
}

int main(int argc, char **argv)
{
    const char *state = NULL, *out = NULL;
    long steps = -1, step = 0, n, i;
    int c, k, extent, width;
    FILE *f;
    for (c = 1; c + 1 < argc; c += 2) {
        if (strcmp(argv[c], "--state") == 0)
            state = argv[c + 1];
        else if (strcmp(argv[c], "--steps") == 0)
            steps = atol(argv[c + 1]);
        else if (strcmp(argv[c], "--out") == 0)
            out = argv[c + 1];
        else
            usage();
    }
    if (!state || !out || steps < 0 || c != argc)
        usage();
    A = calloc((size_t)EXTENT * W, sizeof(double));
    f = fopen(state, "r");
    if (!A || !f) {
        perror(state);
        return 1;
    }
    if (fscanf(f, "STATE v1 extent=%d width=%d STEP %ld", &extent, &width, &step) != 3 || extent != EXTENT
        || width != W) {
        fprintf(stderr, "%s: state header does not match this program\n", state);
        return 1;
    }
    for (i = 0; i < (long)EXTENT * W; ++i) {
        if (fscanf(f, "%lf", &A[i]) != 1) {
            fprintf(stderr, "%s: truncated state at value %ld\n", state, i);
            return 1;
        }
    }
    fclose(f);
    f = fopen(out, "w");
    if (!f) {
        perror(out);
        return 1;
    }
    fprintf(f, "%s\n", CHANNEL_HEADER);
    for (n = 1; n <= steps; ++n) {
        step_all(step + n);
        fprintf(f, "%.16e", (double)(step + n) * DT);
        for (c = 0; c < NCHANNELS; ++c)
            for (k = 0; k < W; ++k)
                fprintf(f, ",%.16e", AT(CHANNEL_SLOTS[c], k));
        fputc('\n', f);
    }
    return fclose(f) == 0 ? 0 : 1;
}
